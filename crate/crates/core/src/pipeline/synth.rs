//! Synthetic discharge records shaped like the SPARCS export, with planted
//! effects on length of stay.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnData, ColumnKind, Dataset, MAX_LOS_DAYS};
use crate::error::{Error, Result};
use crate::rng::seeded;

pub const MIN_SYNTH_ROWS: usize = 100;

pub const SEVERITY_COLUMN: &str = "APR Severity of Illness Code";

const AGE_GROUPS: [&str; 5] = ["0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"];
const AGE_WEIGHTS: [f64; 5] = [0.10, 0.12, 0.20, 0.30, 0.28];
const SEVERITY: [&str; 4] = ["Minor", "Moderate", "Major", "Extreme"];
const SEVERITY_WEIGHTS: [f64; 4] = [0.35, 0.38, 0.20, 0.07];
const AREAS: [&str; 8] = [
    "New York City",
    "Long Island",
    "Hudson Valley",
    "Capital/Adirond",
    "Western NY",
    "Central NY",
    "Finger Lakes",
    "Southern Tier",
];
const GENDERS: [&str; 2] = ["F", "M"];
const RACES: [&str; 4] = [
    "White",
    "Black/African American",
    "Other Race",
    "Multi-racial",
];
const RACE_WEIGHTS: [f64; 4] = [0.58, 0.18, 0.21, 0.03];
const ADMISSIONS: [&str; 4] = ["Emergency", "Elective", "Urgent", "Trauma"];
const ADMISSION_WEIGHTS: [f64; 4] = [0.68, 0.20, 0.10, 0.02];
const DISPOSITIONS: [&str; 6] = [
    "Home or Self Care",
    "Home w/ Home Health Services",
    "Skilled Nursing Home",
    "Expired",
    "Left Against Medical Advice",
    "Short-term Hospital",
];
const DISPOSITION_WEIGHTS: [f64; 6] = [0.62, 0.18, 0.11, 0.03, 0.02, 0.04];
const PAYERS: [&str; 5] = [
    "Medicare",
    "Medicaid",
    "Private Health Insurance",
    "Blue Cross/Blue Shield",
    "Self-Pay",
];
const PAYER_WEIGHTS: [f64; 5] = [0.36, 0.30, 0.16, 0.14, 0.04];

/// Generator settings. Effects act on log length of stay; with every effect
/// at zero the stay is independent of all other columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub seed: u64,
    /// Standard deviation of the log-stay noise.
    pub noise: f64,
    /// Log-stay shift per severity level above Minor.
    pub severity_effect: f64,
    /// Log-stay shift per age group above the youngest.
    pub age_effect: f64,
    /// Log-stay shift for emergency admissions.
    pub emergency_effect: f64,
    /// Elasticity of costs with respect to the stay.
    pub cost_effect: f64,
    /// Probability that an optional cell is blank.
    pub missing_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_rows: 10_000,
            seed: 42,
            noise: 0.45,
            severity_effect: 0.55,
            age_effect: 0.12,
            emergency_effect: 0.2,
            cost_effect: 0.35,
            missing_rate: 0.002,
        }
    }
}

impl SynthSpec {
    pub fn with_rows(n_rows: usize, seed: u64) -> Self {
        Self {
            n_rows,
            seed,
            ..Self::default()
        }
    }

    /// All effects zeroed: labels carry no information about the features.
    pub fn null(n_rows: usize, seed: u64) -> Self {
        Self {
            severity_effect: 0.0,
            age_effect: 0.0,
            emergency_effect: 0.0,
            cost_effect: 0.0,
            ..Self::with_rows(n_rows, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < MIN_SYNTH_ROWS {
            return Err(Error::InvalidParameter(format!(
                "synthetic row count must be >= {MIN_SYNTH_ROWS}, got {}",
                self.n_rows
            )));
        }
        let finite = [
            self.noise,
            self.severity_effect,
            self.age_effect,
            self.emergency_effect,
            self.cost_effect,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.noise < 0.0 {
            return Err(Error::InvalidParameter(
                "synthetic effects must be finite and noise >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidParameter(format!(
                "missing_rate {} outside [0, 1)",
                self.missing_rate
            )));
        }
        Ok(())
    }
}

fn pick(rng: &mut crate::rng::Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct Builder {
    text: Vec<(&'static str, Vec<Option<String>>)>,
    numbers: Vec<(&'static str, ColumnKind, Vec<Option<f64>>)>,
}

impl Builder {
    fn text(&mut self, col: usize, value: Option<&str>) {
        self.text[col].1.push(value.map(str::to_string));
    }

    fn number(&mut self, col: usize, value: Option<f64>) {
        self.numbers[col].2.push(value);
    }
}

/// Generates `spec.n_rows` records. Stays are right-skewed and clipped to
/// `[1, 120]`; the same spec always yields the same table.
pub fn synthesize_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = spec.n_rows;

    let text_names = [
        "Health Service Area",
        "Zip Code - 3 digits",
        "Age Group",
        "Gender",
        "Race",
        "Type of Admission",
        "Patient Disposition",
        "APR Severity of Illness Description",
        "APR Risk of Mortality",
        "APR Medical Surgical Description",
        "Payment Typology 1",
        "Payment Typology 2",
        "Emergency Department Indicator",
    ];
    let number_names = [
        ("Facility Id", ColumnKind::Numeric),
        ("CCS Diagnosis Code", ColumnKind::Numeric),
        ("CCS Procedure Code", ColumnKind::Numeric),
        ("APR DRG Code", ColumnKind::Numeric),
        ("APR MDC Code", ColumnKind::Numeric),
        (SEVERITY_COLUMN, ColumnKind::Numeric),
        ("Total Charges", ColumnKind::Currency),
        ("Total Costs", ColumnKind::Currency),
    ];
    let mut b = Builder {
        text: text_names
            .iter()
            .map(|&name| (name, Vec::with_capacity(n)))
            .collect(),
        numbers: number_names
            .iter()
            .map(|&(name, kind)| (name, kind, Vec::with_capacity(n)))
            .collect(),
    };
    let mut los = Vec::with_capacity(n);

    for _ in 0..n {
        let missing = |rng: &mut crate::rng::Rng| rng.random::<f64>() < spec.missing_rate;
        let area = rng.random_range(0..AREAS.len());
        let facility = 1 + area * 100 + rng.random_range(0..40);
        let zip = format!("{}", 100 + area * 6 + rng.random_range(0..6));
        let age = pick(&mut rng, &AGE_WEIGHTS);
        let gender = rng.random_range(0..GENDERS.len());
        let race = pick(&mut rng, &RACE_WEIGHTS);
        let admission = pick(&mut rng, &ADMISSION_WEIGHTS);
        let disposition = pick(&mut rng, &DISPOSITION_WEIGHTS);
        let severity = pick(&mut rng, &SEVERITY_WEIGHTS);
        let mortality = (severity as i64 + rng.random_range(-1..=1)).clamp(0, 3) as usize;
        let surgical = rng.random::<f64>() < 0.25;
        let payer = pick(&mut rng, &PAYER_WEIGHTS);
        let secondary = rng.random::<f64>() < 0.4;
        let secondary_payer = rng.random_range(0..PAYERS.len());
        let emergency = admission == 0 || rng.random::<f64>() < 0.05;
        let diagnosis = rng.random_range(1..=260);
        let procedure = if surgical {
            rng.random_range(1..=231)
        } else {
            0
        };
        let mdc = rng.random_range(0..=25);
        let drg = mdc * 36 + rng.random_range(1..=36);

        let log_stay = 0.9
            + spec.severity_effect * severity as f64
            + spec.age_effect * age as f64
            + if emergency {
                spec.emergency_effect
            } else {
                0.0
            }
            + spec.noise * std_normal.sample(&mut rng);
        let stay = log_stay.exp().round().clamp(1.0, f64::from(MAX_LOS_DAYS)) as u32;
        let daily = (7.6 + 0.35 * std_normal.sample(&mut rng)).exp();
        let costs = daily * f64::from(stay).powf(spec.cost_effect);
        let charges = costs * (1.0 + 0.2 * std_normal.sample(&mut rng)).exp();

        b.text(0, Some(AREAS[area]));
        b.text(1, Some(&zip));
        b.text(2, Some(AGE_GROUPS[age]));
        b.text(3, Some(GENDERS[gender]));
        b.text(4, (!missing(&mut rng)).then_some(RACES[race]));
        b.text(5, Some(ADMISSIONS[admission]));
        b.text(6, Some(DISPOSITIONS[disposition]));
        b.text(7, Some(SEVERITY[severity]));
        b.text(8, Some(SEVERITY[mortality]));
        b.text(9, Some(if surgical { "Surgical" } else { "Medical" }));
        b.text(10, (!missing(&mut rng)).then_some(PAYERS[payer]));
        b.text(11, secondary.then_some(PAYERS[secondary_payer]));
        b.text(12, Some(if emergency { "Y" } else { "N" }));
        b.number(0, Some(facility as f64));
        b.number(1, Some(f64::from(diagnosis)));
        b.number(2, Some(f64::from(procedure)));
        b.number(3, Some(f64::from(drg)));
        b.number(4, Some(f64::from(mdc)));
        b.number(5, Some((severity + 1) as f64));
        b.number(
            6,
            (!missing(&mut rng)).then_some((charges * 100.0).round() / 100.0),
        );
        b.number(7, Some((costs * 100.0).round() / 100.0));
        los.push(Some(stay));
    }

    let mut columns: Vec<Column> = b
        .text
        .into_iter()
        .map(|(name, values)| Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            data: ColumnData::Text(values),
        })
        .chain(b.numbers.into_iter().map(|(name, kind, values)| Column {
            name: name.to_string(),
            kind,
            data: ColumnData::Number(values),
        }))
        .collect();
    columns.sort_by_key(|c| EXPORT_ORDER.iter().position(|n| *n == c.name));
    columns.push(Column {
        name: "Length of Stay".to_string(),
        kind: ColumnKind::Los,
        data: ColumnData::Days(los),
    });
    Dataset::new(columns)
}

const EXPORT_ORDER: [&str; 21] = [
    "Health Service Area",
    "Facility Id",
    "Zip Code - 3 digits",
    "Age Group",
    "Gender",
    "Race",
    "Type of Admission",
    "Patient Disposition",
    "CCS Diagnosis Code",
    "CCS Procedure Code",
    "APR DRG Code",
    "APR MDC Code",
    SEVERITY_COLUMN,
    "APR Severity of Illness Description",
    "APR Risk of Mortality",
    "APR Medical Surgical Description",
    "Payment Typology 1",
    "Payment Typology 2",
    "Emergency Department Indicator",
    "Total Charges",
    "Total Costs",
];
