//! Steady-state gas-lift well field: production curves, prices, analytic
//! sensitivities, and the feasible region builders.
//!
//! Each well maps its two inputs (injected gas rate, choke opening) to three
//! output flows (oil, water, gas). Oil follows a saturating log curve in the
//! injected gas with a quadratic loss and a linear choke term; water and gas
//! are fixed ratios of oil. Wells are independent, so the field Jacobian is
//! block diagonal. Inputs live in `[0, 1]` per entry and the shared gas-lift
//! budget caps the sum of injection rates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::LinearCost;
use crate::qp::PolyhedralSet;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("input {index} = {value} outside [0, 1]")]
    InputOutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// One well's production curve and output ratios. Oil output is
/// `(log_gain*log10(1 + saturation*q) - quadratic_loss*q^2 + choke_gain*v) / norm`
/// for injection `q` and choke opening `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellModel {
    pub log_gain: f64,
    pub saturation: f64,
    pub quadratic_loss: f64,
    pub choke_gain: f64,
    pub norm: f64,
    pub water_oil_ratio: f64,
    pub gas_oil_ratio: f64,
}

impl WellModel {
    pub fn oil_rate(&self, injection: f64, choke: f64) -> f64 {
        (self.log_gain * (1.0 + self.saturation * injection).log10()
            - self.quadratic_loss * injection * injection
            + self.choke_gain * choke)
            / self.norm
    }

    /// Partial derivatives of the oil rate with respect to (injection, choke).
    pub fn oil_gradient(&self, injection: f64, _choke: f64) -> (f64, f64) {
        let d_injection = (self.log_gain * self.saturation
            / ((1.0 + self.saturation * injection) * std::f64::consts::LN_10)
            - 2.0 * self.quadratic_loss * injection)
            / self.norm;
        (d_injection, self.choke_gain / self.norm)
    }
}

/// Per-flow prices: oil and gas sell, water and injection cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub oil: f64,
    pub gas: f64,
    pub water: f64,
    pub injection: f64,
}

/// The whole field: an ordered list of wells plus prices. Inputs stack as
/// `[q_inj_1, v_1, q_inj_2, v_2, ...]`, outputs as
/// `[oil_1, water_1, gas_1, oil_2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub wells: Vec<WellModel>,
    pub prices: PriceModel,
}

impl FieldModel {
    /// The four-well benchmark configuration this crate's defaults target.
    pub fn four_well_benchmark() -> Self {
        let wells = vec![
            WellModel {
                log_gain: 5.0,
                saturation: 25.0,
                quadratic_loss: 0.05,
                choke_gain: 2.0,
                norm: 34.5,
                water_oil_ratio: 0.3,
                gas_oil_ratio: 0.1,
            },
            WellModel {
                log_gain: 6.0,
                saturation: 35.0,
                quadratic_loss: 0.15,
                choke_gain: 3.0,
                norm: 34.5,
                water_oil_ratio: 0.12,
                gas_oil_ratio: 0.12,
            },
            WellModel {
                log_gain: 5.0,
                saturation: 20.0,
                quadratic_loss: 0.025,
                choke_gain: 1.0,
                norm: 34.5,
                water_oil_ratio: 0.2,
                gas_oil_ratio: 0.1,
            },
            WellModel {
                log_gain: 10.0,
                saturation: 40.0,
                quadratic_loss: 0.175,
                choke_gain: 5.0,
                norm: 34.5,
                water_oil_ratio: 0.2,
                gas_oil_ratio: 0.1,
            },
        ];
        let prices = PriceModel {
            oil: 5.0,
            gas: 1.0,
            water: 0.3,
            injection: 0.7,
        };
        Self { wells, prices }
    }

    pub fn num_wells(&self) -> usize {
        self.wells.len()
    }

    pub fn n_inputs(&self) -> usize {
        2 * self.wells.len()
    }

    pub fn n_outputs(&self) -> usize {
        3 * self.wells.len()
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<(), PlantError> {
        if u.len() != self.n_inputs() {
            return Err(PlantError::Dimension(format!(
                "input has length {}, expected {}",
                u.len(),
                self.n_inputs()
            )));
        }
        for (i, &v) in u.iter().enumerate() {
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(PlantError::InputOutOfRange { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Steady-state output flows for a stacked input vector.
    pub fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        self.check_input(u)?;
        let mut y = DVector::zeros(self.n_outputs());
        for (w, well) in self.wells.iter().enumerate() {
            let oil = well.oil_rate(u[2 * w], u[2 * w + 1]);
            y[3 * w] = oil;
            y[3 * w + 1] = well.water_oil_ratio * oil;
            y[3 * w + 2] = well.gas_oil_ratio * oil;
        }
        Ok(y)
    }

    /// Exact Jacobian of [`evaluate`](Self::evaluate): block diagonal, one
    /// 3x2 block per well.
    pub fn analytic_jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>, PlantError> {
        self.check_input(u)?;
        let mut jac = DMatrix::zeros(self.n_outputs(), self.n_inputs());
        for (w, well) in self.wells.iter().enumerate() {
            let (d_inj, d_choke) = well.oil_gradient(u[2 * w], u[2 * w + 1]);
            for (row, ratio) in [
                (3 * w, 1.0),
                (3 * w + 1, well.water_oil_ratio),
                (3 * w + 2, well.gas_oil_ratio),
            ] {
                jac[(row, 2 * w)] = ratio * d_inj;
                jac[(row, 2 * w + 1)] = ratio * d_choke;
            }
        }
        Ok(jac)
    }

    /// The minimized running cost: injection purchases minus sales revenue.
    /// Negative at profitable operating points.
    pub fn cost(&self, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for w in 0..self.wells.len() {
            total += -self.prices.oil * y[3 * w] + self.prices.water * y[3 * w + 1]
                - self.prices.gas * y[3 * w + 2]
                + self.prices.injection * u[2 * w];
        }
        total
    }

    /// Profit is the negated cost; what reports show to users.
    pub fn profit(&self, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        -self.cost(u, y)
    }

    /// The same cost expressed as a linear model for the controller:
    /// per-well price rows over inputs and outputs.
    pub fn cost_model(&self) -> LinearCost {
        let n = self.wells.len();
        let mut price_u = DVector::zeros(2 * n);
        let mut price_y = DVector::zeros(3 * n);
        for w in 0..n {
            price_u[2 * w] = self.prices.injection;
            price_y[3 * w] = -self.prices.oil;
            price_y[3 * w + 1] = self.prices.water;
            price_y[3 * w + 2] = -self.prices.gas;
        }
        LinearCost::new(price_u, price_y)
    }

    /// Feasible input region for a given shared injection budget: per-entry
    /// `[0, 1]` boxes plus the summed-injection row. The budget row is the
    /// LAST row so time-varying caps can retarget it by index.
    pub fn availability_constraints(&self, cap: f64) -> PolyhedralSet {
        availability_constraints(cap, self.num_wells())
    }
}

/// See [`FieldModel::availability_constraints`].
pub fn availability_constraints(cap: f64, n_wells: usize) -> PolyhedralSet {
    let n = 2 * n_wells;
    let zeros = DVector::zeros(n);
    let ones = DVector::from_element(n, 1.0);
    let mut budget = DVector::zeros(n);
    for w in 0..n_wells {
        budget[2 * w] = 1.0;
    }
    PolyhedralSet::from_bounds(&zeros, &ones).with_row(&budget, cap)
}

/// Row index of the injection budget inside
/// [`availability_constraints`]; kept adjacent to the builder so the two
/// cannot drift apart.
pub fn budget_row(n_wells: usize) -> usize {
    4 * n_wells
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    #[test]
    fn zero_input_produces_zero_flow() {
        let field = FieldModel::four_well_benchmark();
        let y = field.evaluate(&DVector::zeros(8)).unwrap();
        assert_eq!(y.amax(), 0.0);
    }

    #[test]
    fn oil_rates_match_hand_evaluation() {
        let field = FieldModel::four_well_benchmark();
        let mut u = DVector::zeros(8);
        u[0] = 1.0;
        u[1] = 1.0;
        u[6] = 0.5;
        u[7] = 1.0;
        let y = field.evaluate(&u).unwrap();
        assert_relative_eq!(y[0], 0.26159, epsilon = 1e-5);
        assert_relative_eq!(y[9], 0.52691, epsilon = 1e-5);
    }

    #[test]
    fn water_and_gas_track_oil_by_ratio() {
        let field = FieldModel::four_well_benchmark();
        let u = DVector::from_element(8, 0.6);
        let y = field.evaluate(&u).unwrap();
        for (w, well) in field.wells.iter().enumerate() {
            let oil = y[3 * w];
            assert!(oil > 0.0);
            assert_relative_eq!(y[3 * w + 1] / oil, well.water_oil_ratio, epsilon = 1e-14);
            assert_relative_eq!(y[3 * w + 2] / oil, well.gas_oil_ratio, epsilon = 1e-14);
        }
    }

    #[test]
    fn oil_stays_nonnegative_over_the_box() {
        let field = FieldModel::four_well_benchmark();
        for i in 0..=10 {
            for j in 0..=10 {
                let (q, v) = (i as f64 / 10.0, j as f64 / 10.0);
                for well in &field.wells {
                    assert!(well.oil_rate(q, v) >= 0.0, "negative oil at ({q}, {v})");
                }
            }
        }
    }

    #[test]
    fn out_of_range_input_is_an_error_not_a_clamp() {
        let field = FieldModel::four_well_benchmark();
        let mut u = DVector::zeros(8);
        u[3] = 1.1;
        assert!(matches!(
            field.evaluate(&u),
            Err(PlantError::InputOutOfRange { index: 3, .. })
        ));
        // Roundoff-sized excursions are accepted.
        let mut u = DVector::zeros(8);
        u[0] = -1e-12;
        assert!(field.evaluate(&u).is_ok());
    }

    #[test]
    fn choke_sensitivity_is_constant() {
        let field = FieldModel::four_well_benchmark();
        for q in [0.0, 0.3, 0.9] {
            let u = DVector::from_element(8, q);
            let jac = field.analytic_jacobian(&u).unwrap();
            assert_relative_eq!(jac[(0, 1)], 2.0 / 34.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn cross_well_sensitivities_are_zero() {
        let field = FieldModel::four_well_benchmark();
        let u = DVector::from_element(8, 0.4);
        let jac = field.analytic_jacobian(&u).unwrap();
        for (r, c) in [(0, 2), (1, 4), (2, 7), (5, 0), (9, 3)] {
            assert_eq!(jac[(r, c)], 0.0);
        }
    }

    #[test]
    fn cost_matches_hand_arithmetic_and_is_linear_in_prices() {
        let mut field = FieldModel::four_well_benchmark();
        field.wells.truncate(1);
        let u = vec(&[0.1, 0.0]);
        let y = vec(&[0.2, 0.06, 0.02]);
        assert_relative_eq!(field.cost(&u, &y), -0.932, epsilon = 1e-12);
        assert_relative_eq!(field.profit(&u, &y), 0.932, epsilon = 1e-12);

        let mut doubled = field.clone();
        doubled.prices = PriceModel {
            oil: 10.0,
            gas: 2.0,
            water: 0.6,
            injection: 1.4,
        };
        assert_relative_eq!(doubled.cost(&u, &y), 2.0 * field.cost(&u, &y), epsilon = 1e-12);
    }

    #[test]
    fn cost_model_agrees_with_direct_cost() {
        use crate::controller::CostModel;
        let field = FieldModel::four_well_benchmark();
        let cost = field.cost_model();
        let u = DVector::from_element(8, 0.35);
        let y = field.evaluate(&u).unwrap();
        assert_relative_eq!(cost.value(&u, &y), field.cost(&u, &y), epsilon = 1e-12);
    }

    #[test]
    fn budget_row_caps_total_injection_only() {
        let set = availability_constraints(2.0, 4);
        assert_eq!(set.num_constraints(), 17);
        assert_eq!(budget_row(4), 16);

        // Injections sum to 2.1, violating the cap by 0.1.
        let mut u = DVector::zeros(8);
        for w in 0..4 {
            u[2 * w] = 0.525;
            u[2 * w + 1] = 1.0;
        }
        assert_relative_eq!(set.max_violation(&u), 0.1, epsilon = 1e-12);

        // A cap of 4 can never bind inside the box.
        let wide = availability_constraints(4.0, 4);
        assert!(wide.contains(&DVector::from_element(8, 1.0), 1e-12));

        // A cap of zero pins every injection to zero.
        let tight = availability_constraints(0.0, 4);
        assert!(tight.contains(&vec(&[0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0]), 0.0));
        assert!(!tight.contains(&vec(&[0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 1e-9));
    }
}
