use std::io::Write;
use std::path::Path;

use fracvar::sampler::FFT_LEVEL_CAP;
use fracvar::singularity::{discriminate, power_study, DiscriminationResult, Hypothesis};
use fracvar::variation::{
    calibrate_trifbm, estimate_hurst_v2, expected_qv, kurchenko_statistic, p_variation_sum,
    scaled_dyadic_sum, trifbm_calibration, weighted_qv, weighted_qv_limit,
};
use fracvar::{Grid, ProcessSpec, Sampler};
use thiserror::Error;

use crate::args::{Cli, Command, Family, Opts, Stat, WeightExponent};
use crate::output::{
    float, opt, opt_float, process_cols, GridCols, StatRow, DISCRIMINATION_HEADER, STAT_HEADER,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] fracvar::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: Cli) -> Result<()> {
    let (out, bytes) = match &cli.command {
        Command::Simulate(o) => (&o.out, simulate(o)?),
        Command::Qv(q) => (&q.opts.out, qv(q.stat, &q.opts)?),
        Command::ExpectedQv(o) => (&o.out, expected(o)?),
        Command::EstimateHurst(o) => (&o.out, estimate_hurst(o)?),
        Command::Discriminate(o) => (&o.out, discriminate_one(o)?),
        Command::Power(o) => (&o.out, power(o)?),
        Command::CalibrateTrifbm(o) => (&o.out, calibrate(o)?),
    };
    emit(out.as_deref(), &bytes)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn table(header: &[&str]) -> Result<csv::Writer<Vec<u8>>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    Ok(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn spec_from(o: &Opts) -> Result<ProcessSpec> {
    let h = o.hurst.ok_or_else(|| usage("--hurst is required"))?;
    let need_k = || {
        o.k.ok_or_else(|| usage("--k is required for bifbm and trifbm"))
    };
    let spec = match o.process {
        Family::Fbm => ProcessSpec::fbm(h),
        Family::Bifbm => ProcessSpec::bifbm(h, need_k()?),
        Family::Trifbm => ProcessSpec::trifbm(h, need_k()?),
        Family::Nfbm => ProcessSpec::nth_fbm(
            o.order
                .ok_or_else(|| usage("--order is required for nfbm"))?,
            h,
        ),
    };
    spec.validate()?;
    Ok(spec)
}

/// The alternative hypothesis: same family, `--alt-hurst`/`--alt-k` replacing the truth's values.
fn alt_spec_from(o: &Opts, truth: &ProcessSpec) -> Result<ProcessSpec> {
    let h = o.alt_hurst.unwrap_or(truth.hurst());
    let spec = match *truth {
        ProcessSpec::Fbm { .. } => ProcessSpec::fbm(
            o.alt_hurst
                .ok_or_else(|| usage("--alt-hurst is required for fbm"))?,
        ),
        ProcessSpec::BifBm { k, .. } => ProcessSpec::bifbm(h, o.alt_k.unwrap_or(k)),
        ProcessSpec::TrifBm { k, .. } => ProcessSpec::trifbm(h, o.alt_k.unwrap_or(k)),
        ProcessSpec::NthFbm { .. } => return Err(usage("no discriminator for nfbm")),
    };
    spec.validate()?;
    Ok(spec)
}

fn grid_from(o: &Opts, spec: &ProcessSpec) -> Result<(Grid, GridCols)> {
    if !(o.t > 0.0 && o.t.is_finite()) {
        return Err(usage(format!(
            "--t must be positive and finite (got {})",
            o.t
        )));
    }
    match (o.level, o.n) {
        (Some(level), _) => {
            let grid = match spec {
                ProcessSpec::Fbm { .. } => Grid::dyadic_capped(o.t, level, FFT_LEVEL_CAP)?,
                _ => Grid::dyadic(o.t, level)?,
            };
            let n = grid.intervals();
            Ok((
                grid,
                GridCols {
                    level: Some(level),
                    n: Some(n),
                },
            ))
        }
        (None, Some(n)) => Ok((
            Grid::uniform(o.t, n)?,
            GridCols {
                level: None,
                n: Some(n),
            },
        )),
        (None, None) => Err(usage("one of --level or --n is required")),
    }
}

fn half_integer_from(o: &Opts) -> Result<(Grid, GridCols)> {
    let n =
        o.n.ok_or_else(|| usage("--n is required (half-integer grid {0, 1/2, ..., n})"))?;
    Ok((
        Grid::half_integer(n)?,
        GridCols {
            level: None,
            n: Some(n),
        },
    ))
}

fn weight_exponent(o: &Opts, spec: &ProcessSpec) -> f64 {
    match o.weight_exponent.unwrap_or(WeightExponent::Auto) {
        WeightExponent::Auto => 2.0 * spec.self_similarity() - 1.0,
        WeightExponent::Value(w) => w,
    }
}

fn seeds(o: &Opts) -> Result<impl Iterator<Item = u64>> {
    if o.paths == 0 {
        return Err(usage("--paths must be at least 1"));
    }
    let base = o.seed;
    Ok((0..o.paths as u64).map(move |i| base.wrapping_add(i)))
}

fn simulate(o: &Opts) -> Result<Vec<u8>> {
    let spec = spec_from(o)?;
    let (grid, _) = grid_from(o, &spec)?;
    let path = Sampler::new(spec, grid)?.sample(o.seed);
    let mut w = table(&["t", "value"])?;
    for (t, x) in path.grid().points().iter().zip(path.values()) {
        w.write_record([float(*t), float(*x)])?;
    }
    finish(w)
}

fn qv(stat: Stat, o: &Opts) -> Result<Vec<u8>> {
    let spec = spec_from(o)?;
    let (grid, cols) = match stat {
        Stat::Kurchenko => half_integer_from(o)?,
        _ => grid_from(o, &spec)?,
    };
    let param = match stat {
        Stat::Pvar => Some(o.p.unwrap_or(2.0)),
        Stat::Weighted => Some(weight_exponent(o, &spec)),
        Stat::Scaled => Some(match (o.alpha, spec) {
            (Some(a), _) => a,
            (None, ProcessSpec::TrifBm { hurst, k }) if hurst * k <= 0.5 => {
                trifbm_calibration(hurst, k)?.critical_alpha
            }
            _ => {
                return Err(usage(
                    "--alpha is required unless the process is a trifbm with H*K <= 1/2",
                ))
            }
        }),
        Stat::Kurchenko => None,
    };
    let kurchenko_n = cols.n.unwrap_or(0);
    let sampler = Sampler::new(spec, grid)?;
    let mut w = table(&STAT_HEADER)?;
    for seed in seeds(o)? {
        let path = sampler.sample(seed);
        let r = match (stat, param) {
            (Stat::Pvar, Some(p)) => p_variation_sum(&path, p)?,
            (Stat::Weighted, Some(x)) => weighted_qv(&path, x)?,
            (Stat::Scaled, Some(a)) => scaled_dyadic_sum(&path, a)?,
            _ => kurchenko_statistic(&path, kurchenko_n)?,
        };
        w.write_record(
            StatRow {
                experiment: "qv",
                spec: &spec,
                grid: cols,
                stat: &r.name,
                param,
                value: Some(r.value),
                reference: r.reference,
                rel_error: r.rel_error,
                seed: Some(seed),
            }
            .record(),
        )?;
    }
    finish(w)
}

fn expected(o: &Opts) -> Result<Vec<u8>> {
    let spec = spec_from(o)?;
    let (grid, cols) = grid_from(o, &spec)?;
    let x = weight_exponent(o, &spec);
    let value = expected_qv(&spec, &grid, x, 1.0)?;
    let reference = weighted_qv_limit(&spec, x, grid.horizon());
    let mut w = table(&STAT_HEADER)?;
    w.write_record(
        StatRow {
            experiment: "expected-qv",
            spec: &spec,
            grid: cols,
            stat: "expected_weighted",
            param: Some(x),
            value: Some(value),
            reference,
            rel_error: reference
                .filter(|r| *r != 0.0)
                .map(|r| (value - r).abs() / r.abs()),
            seed: None,
        }
        .record(),
    )?;
    finish(w)
}

fn estimate_hurst(o: &Opts) -> Result<Vec<u8>> {
    let spec = spec_from(o)?;
    let (grid, cols) = half_integer_from(o)?;
    let n = cols.n.unwrap_or(0);
    let sampler = Sampler::new(spec, grid)?;
    let reference = match spec {
        ProcessSpec::Fbm { hurst } => Some(hurst),
        _ => None,
    };
    let mut w = table(&STAT_HEADER)?;
    for seed in seeds(o)? {
        let stat = kurchenko_statistic(&sampler.sample(seed), n)?;
        let estimate = match estimate_hurst_v2(stat.value) {
            Ok(h) => Some(h),
            Err(e) => {
                log::warn!("seed {seed}: {e}");
                None
            }
        };
        let rel_error = estimate.zip(reference).map(|(h, r)| (h - r).abs() / r);
        w.write_record(
            StatRow {
                experiment: "estimate-hurst",
                spec: &spec,
                grid: cols,
                stat: "hurst_v2",
                param: None,
                value: estimate,
                reference,
                rel_error,
                seed: Some(seed),
            }
            .record(),
        )?;
    }
    finish(w)
}

struct Setup {
    truth: ProcessSpec,
    alt: ProcessSpec,
    h1: Hypothesis,
    h2: Hypothesis,
    grid: Grid,
    cols: GridCols,
}

fn discrimination_setup(o: &Opts) -> Result<Setup> {
    let truth = spec_from(o)?;
    let alt = alt_spec_from(o, &truth)?;
    let (grid, cols) = match truth {
        ProcessSpec::Fbm { .. } => half_integer_from(o)?,
        _ => grid_from(o, &truth)?,
    };
    Ok(Setup {
        truth,
        alt,
        h1: Hypothesis::from_spec(truth)?,
        h2: Hypothesis::from_spec(alt)?,
        grid,
        cols,
    })
}

fn discrimination_record(
    experiment: &str,
    s: &Setup,
    seed: u64,
    r: &DiscriminationResult,
) -> Vec<String> {
    let mut rec = vec![experiment.to_owned()];
    rec.extend(process_cols(&s.truth));
    rec.extend([
        opt(s.cols.level),
        opt(s.cols.n),
        float(s.alt.hurst()),
        opt_float(s.alt.k()),
        seed.to_string(),
        "1".to_owned(),
        r.selected.clone(),
        u8::from(r.selected_index == 0).to_string(),
        float(r.margin),
        float(r.discrepancies[0]),
        float(r.discrepancies[1]),
        float(r.statistics[0].value),
        float(r.statistics[1].value),
        String::new(),
    ]);
    rec
}

fn discriminate_one(o: &Opts) -> Result<Vec<u8>> {
    let s = discrimination_setup(o)?;
    let path = Sampler::new(s.truth, s.grid.clone())?.sample(o.seed);
    let r = discriminate(&path, &s.h1, &s.h2)?;
    for note in &r.notes {
        log::info!("{note}");
    }
    let mut w = table(&DISCRIMINATION_HEADER)?;
    w.write_record(discrimination_record("discriminate", &s, o.seed, &r))?;
    finish(w)
}

fn power(o: &Opts) -> Result<Vec<u8>> {
    let s = discrimination_setup(o)?;
    let study = power_study(&s.truth, &s.h1, &s.h2, o.paths, o.seed, &s.grid)?;
    let mut w = table(&DISCRIMINATION_HEADER)?;
    for rec in &study.records {
        w.write_record(discrimination_record("power", &s, rec.seed, &rec.result))?;
    }
    let mut summary = vec!["power_summary".to_owned()];
    summary.extend(process_cols(&s.truth));
    summary.extend([
        opt(s.cols.level),
        opt(s.cols.n),
        float(s.alt.hurst()),
        opt_float(s.alt.k()),
        o.seed.to_string(),
        o.paths.to_string(),
        study.truth.clone(),
        study.correct().to_string(),
        float(study.median_margin()),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        float(study.rate),
    ]);
    w.write_record(summary)?;
    finish(w)
}

fn calibrate(o: &Opts) -> Result<Vec<u8>> {
    let h = o.hurst.ok_or_else(|| usage("--hurst is required"))?;
    let k = o.k.ok_or_else(|| usage("--k is required"))?;
    let spec = ProcessSpec::trifbm(h, k);
    let cal = calibrate_trifbm(h, k)?;
    if let Some(which) = cal.matches(0.05) {
        log::info!(
            "critical exponent {} is within 0.05 of {which}",
            cal.critical_alpha
        );
    }
    let mut w = table(&STAT_HEADER)?;
    let row =
        |stat: &'static str, level: Option<u32>, value: f64, reference: Option<f64>| StatRow {
            experiment: "calibrate-trifbm",
            spec: &spec,
            grid: GridCols {
                level,
                n: level.map(|l| 1usize << l),
            },
            stat,
            param: None,
            value: Some(value),
            reference,
            rel_error: reference
                .filter(|r| *r != 0.0)
                .map(|r| (value - r).abs() / r.abs()),
            seed: None,
        };
    for l in &cal.levels {
        w.write_record(row("expected_sum", Some(l.level), l.expected_sum, None).record())?;
        if let Some(a) = l.alpha_estimate {
            w.write_record(row("alpha_estimate", Some(l.level), a, None).record())?;
        }
    }
    w.write_record(
        row(
            "critical_alpha",
            None,
            cal.critical_alpha,
            Some(2.0 * h * k),
        )
        .record(),
    )?;
    w.write_record(row("limit", None, cal.limit, None).record())?;
    finish(w)
}
