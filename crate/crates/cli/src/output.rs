use fracvar::ProcessSpec;

pub const STAT_HEADER: [&str; 13] = [
    "experiment",
    "process",
    "H",
    "K",
    "order",
    "level",
    "n",
    "stat",
    "param",
    "value",
    "reference",
    "rel_error",
    "seed",
];

pub const DISCRIMINATION_HEADER: [&str; 19] = [
    "experiment",
    "process",
    "H",
    "K",
    "order",
    "level",
    "n",
    "alt_H",
    "alt_K",
    "seed",
    "paths",
    "selected",
    "correct",
    "margin",
    "d_truth",
    "d_alt",
    "stat_truth",
    "stat_alt",
    "rate",
];

/// Shortest decimal string that parses back to the same `f64`.
pub fn float(x: f64) -> String {
    format!("{x}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Grid description shared by every row: dyadic level (if any) and interval count.
#[derive(Debug, Clone, Copy)]
pub struct GridCols {
    pub level: Option<u32>,
    pub n: Option<usize>,
}

/// The process columns `process,H,K,order`.
pub fn process_cols(spec: &ProcessSpec) -> [String; 4] {
    [
        spec.family().to_owned(),
        float(spec.hurst()),
        opt_float(spec.k()),
        opt(spec.order()),
    ]
}

pub struct StatRow<'a> {
    pub experiment: &'a str,
    pub spec: &'a ProcessSpec,
    pub grid: GridCols,
    pub stat: &'a str,
    pub param: Option<f64>,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    pub seed: Option<u64>,
}

impl StatRow<'_> {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.experiment.to_owned()];
        r.extend(process_cols(self.spec));
        r.extend([
            opt(self.grid.level),
            opt(self.grid.n),
            self.stat.to_owned(),
            opt_float(self.param),
            opt_float(self.value),
            opt_float(self.reference),
            opt_float(self.rel_error),
            opt(self.seed),
        ]);
        r
    }
}
