//! Subcommand implementations behind the `turbkd` binary. Each subcommand
//! reads a [`ScenarioConfig`], writes CSV artifacts (plus optional SVG
//! plots) into the output directory, and reports whether the scenario
//! produced a key.

use super::config::{ProtocolMode, ScenarioConfig, SelectionMode};
use super::output::{svg_line_plot, CsvWriter, Series};
use crate::asymptotic::{critical_transmittance, RateCurve};
use crate::channel::ChannelParams;
use crate::detection::ProtocolState;
use crate::error::{Error, Result};
use crate::montecarlo::{empirical_key_rate, simulate_session, SessionSettings};
use crate::optimizer::{optimize_state, OptimizationProblem, ThresholdPolicy};
use crate::presets;
use crate::probe;
use crate::selection::{arts_scan, finite_selected_rate, prts_rate, PrtsMode};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    RateCurve,
    Optimize,
    Scan,
    Prts,
    Simulate,
    ThresholdStudy,
    Improvement,
    Calibrate,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::RateCurve => "rate-curve",
            Subcommand::Optimize => "optimize",
            Subcommand::Scan => "scan",
            Subcommand::Prts => "prts",
            Subcommand::Simulate => "simulate",
            Subcommand::ThresholdStudy => "threshold-study",
            Subcommand::Improvement => "improvement",
            Subcommand::Calibrate => "calibrate",
        }
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    /// The scenario is sound but yields no key (exit status 3).
    pub no_key: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable one-liners for stdout.
    pub summary: Vec<String>,
}

impl RunOutcome {
    fn new() -> Self {
        Self {
            no_key: false,
            files: vec![],
            summary: vec![],
        }
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_log10(rate: f64) -> String {
    if rate > 0.0 {
        format!("{}", rate.log10())
    } else {
        String::new()
    }
}

/// Resolve the sender state per `protocol.mode`, optimizing against the
/// assumed channel when asked to.
fn resolve_state(config: &ScenarioConfig) -> Result<ProtocolState> {
    match config.protocol.mode {
        ProtocolMode::Explicit => config.protocol.explicit_state(),
        ProtocolMode::Preset => {
            let db = config.assumed_loss_db();
            let rounded = db.round();
            if (db - rounded).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "no reference state at {db} dB; use protocol mode = optimize or explicit"
                )));
            }
            presets::optimized_state_for_loss_db(rounded as u32)
        }
        ProtocolMode::Optimize => {
            let problem = optimization_problem(config, config.channel_assumed()?)?;
            Ok(optimize_state(&problem, config.simulation.seed)?.state)
        }
    }
}

fn optimization_problem(
    config: &ScenarioConfig,
    channel_assumed: ChannelParams,
) -> Result<OptimizationProblem> {
    let policy = match config.selection.mode {
        SelectionMode::Fixed => ThresholdPolicy::Fixed(config.selection.eta_th),
        // scan and asymptotic both optimize selection-aware; the threshold
        // itself is applied downstream
        SelectionMode::Scan | SelectionMode::Asymptotic => {
            ThresholdPolicy::OptimalScan(config.selection.grid()?)
        }
    };
    Ok(OptimizationProblem::new(
        channel_assumed,
        config.receiver.model()?,
        config.security.params()?,
    )
    .with_policy(policy)
    .with_starts(config.protocol.starts))
}

/// Run one subcommand, writing artifacts under `out_dir`.
pub fn run(cmd: Subcommand, config: &ScenarioConfig, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    match cmd {
        Subcommand::RateCurve => rate_curve(config, out_dir),
        Subcommand::Optimize => optimize(config, out_dir),
        Subcommand::Scan => scan(config, out_dir),
        Subcommand::Prts => prts(config, out_dir),
        Subcommand::Simulate => simulate(config, out_dir),
        Subcommand::ThresholdStudy => threshold_study(config, out_dir),
        Subcommand::Improvement => improvement(config, out_dir),
        Subcommand::Calibrate => calibrate(config, out_dir),
    }
}

fn rate_curve(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let state = resolve_state(config)?;
    let rx = config.receiver.model()?;
    let f_ec = config.security.f_ec;

    let curve = RateCurve::sample(&state, &rx, f_ec, 1e-4, 1.0, 400)?;
    let mut csv = CsvWriter::create(
        dir,
        "rate_curve.csv",
        "rate-curve",
        config,
        &["eta", "rate"],
    )?;
    for &(eta, rate) in curve.points() {
        csv.row(&[fmt(eta), fmt(rate)])?;
    }
    outcome.files.push(csv.finish()?);

    let mut crit = CsvWriter::create(dir, "critical.csv", "rate-curve", config, &["eta_cr"])?;
    match critical_transmittance(&state, &rx, f_ec) {
        Ok(cr) => {
            crit.row(&[fmt(cr)])?;
            outcome
                .summary
                .push(format!("critical transmittance eta_CR = {cr:.6}"));
        }
        Err(Error::NoKey) => {
            crit.comment("no positive rate anywhere on (0, 1]")?;
            outcome.no_key = true;
            outcome
                .summary
                .push("no positive asymptotic rate anywhere".into());
        }
        Err(e) => return Err(e),
    }
    outcome.files.push(crit.finish()?);

    if config.output.plot {
        let plot = dir.join("rate_curve.svg");
        svg_line_plot(
            &plot,
            "asymptotic rate vs transmittance",
            "eta",
            "rate (bits/pulse)",
            &[Series {
                label: "R(eta)".into(),
                points: curve.points().to_vec(),
            }],
            false,
        )?;
        outcome.files.push(plot);
    }
    Ok(outcome)
}

fn optimize(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let problem = optimization_problem(config, config.channel_assumed()?)?;
    let result = optimize_state(&problem, config.simulation.seed)?;

    let mut csv = CsvWriter::create(
        dir,
        "optimized_state.csv",
        "optimize",
        config,
        &[
            "q_x",
            "p_mu1",
            "p_mu2",
            "p_mu3",
            "mu1",
            "mu2",
            "mu3",
            "rate",
            "evaluations",
        ],
    )?;
    let s = &result.state;
    csv.row(&[
        fmt(s.q_x),
        fmt(s.p_mu[0]),
        fmt(s.p_mu[1]),
        fmt(s.p_mu[2]),
        fmt(s.mu[0]),
        fmt(s.mu[1]),
        fmt(s.mu[2]),
        fmt(result.rate),
        result.evaluations.to_string(),
    ])?;
    outcome.files.push(csv.finish()?);
    outcome.no_key = result.rate <= 0.0;
    outcome.summary.push(format!(
        "optimized state: q_x = {:.4}, P = [{:.4}, {:.4}, {:.4}], mu = [{:.4}, {:.4}, {:.4}], rate = {:.4e}",
        s.q_x, s.p_mu[0], s.p_mu[1], s.p_mu[2], s.mu[0], s.mu[1], s.mu[2], result.rate
    ));
    Ok(outcome)
}

fn scan(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let channel = config.channel_true()?;
    let state = resolve_state(config)?;
    let rx = config.receiver.model()?;
    let sec = config.security.params()?;
    let grid = config.selection.grid()?;

    let result = arts_scan(&grid, &channel, &state, &rx, &sec)?;
    let mut csv = CsvWriter::create(
        dir,
        "arts_scan.csv",
        "scan",
        config,
        &[
            "eta_th",
            "survival",
            "eta_mean",
            "n_post",
            "ell",
            "rate",
            "log10_rate",
            "is_best",
        ],
    )?;
    for (i, o) in result.outcomes.iter().enumerate() {
        csv.row(&[
            fmt(o.eta_th),
            fmt(o.survival),
            fmt(o.eta_mean),
            o.n_post.to_string(),
            o.ell.to_string(),
            fmt(o.rate),
            fmt_log10(o.rate),
            u8::from(i == result.best).to_string(),
        ])?;
    }
    outcome.files.push(csv.finish()?);

    let best = result.best_outcome();
    outcome.no_key = best.ell == 0;
    outcome.summary.push(format!(
        "scan best: eta_th = {:.4}, rate = {:.4e} (ell = {})",
        best.eta_th, best.rate, best.ell
    ));

    if config.output.plot {
        let plot = dir.join("arts_scan.svg");
        svg_line_plot(
            &plot,
            "secure key rate vs transmittance cutoff",
            "eta_th",
            "rate (bits/pulse)",
            &[Series {
                label: "finite-size rate".into(),
                points: result.outcomes.iter().map(|o| (o.eta_th, o.rate)).collect(),
            }],
            true,
        )?;
        outcome.files.push(plot);
    }
    Ok(outcome)
}

fn prts(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let channel = config.channel_true()?;
    let state = resolve_state(config)?;
    let rx = config.receiver.model()?;
    let sec = config.security.params()?;

    let (mode_name, mode) = match config.selection.mode {
        SelectionMode::Asymptotic => ("asymptotic-cutoff", PrtsMode::AsymptoticCutoff),
        _ => ("prefixed", PrtsMode::Prefixed(config.selection.eta_th)),
    };
    let o = prts_rate(&channel, &state, &rx, &sec, mode);

    let mut csv = CsvWriter::create(
        dir,
        "prts.csv",
        "prts",
        config,
        &[
            "mode",
            "eta_th",
            "survival",
            "eta_mean",
            "n_post",
            "ell",
            "rate",
            "log10_rate",
        ],
    )?;
    csv.row(&[
        mode_name.to_string(),
        fmt(o.eta_th),
        fmt(o.survival),
        fmt(o.eta_mean),
        o.n_post.to_string(),
        o.ell.to_string(),
        fmt(o.rate),
        fmt_log10(o.rate),
    ])?;
    outcome.files.push(csv.finish()?);
    outcome.no_key = o.ell == 0;
    outcome.summary.push(format!(
        "prts ({mode_name}): eta_th = {:.4}, ell = {}, rate = {:.4e}",
        o.eta_th, o.ell, o.rate
    ));
    Ok(outcome)
}

fn simulate(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let channel = config.channel_true()?;
    let state = resolve_state(config)?;
    let rx = config.receiver.model()?;
    let sec = config.security.params()?;

    let n_pulses = config.security.n_pulses;
    if !(n_pulses.fract() == 0.0 && (1.0..=1.8e19).contains(&n_pulses)) {
        return Err(Error::domain(format!(
            "n_pulses = {n_pulses} is not a positive integer pulse count"
        )));
    }
    let settings = SessionSettings {
        n_pulses: n_pulses as u64,
        bin_size: config.simulation.bin_size,
        seed: config.simulation.seed,
        probe_noise: config.simulation.probe_noise,
    };
    let log = simulate_session(&channel, &state, &rx, &settings);

    if config.output.bins {
        let bins_path = dir.join("session_bins.txt");
        let mut bins_file = std::io::BufWriter::new(std::fs::File::create(&bins_path)?);
        log.write_columnar(&mut bins_file)?;
        drop(bins_file);
        outcome.files.push(bins_path);
    }

    let grid = config.selection.grid()?;
    let mut csv = CsvWriter::create(
        dir,
        "empirical_rates.csv",
        "simulate",
        config,
        &[
            "eta_th",
            "n_post",
            "ell",
            "rate",
            "rate_analytic",
            "is_best",
        ],
    )?;
    let empirical: Vec<_> = grid
        .iter()
        .map(|&t| empirical_key_rate(&log, t, &sec))
        .collect();
    let mut best = 0;
    for (i, o) in empirical.iter().enumerate() {
        if o.rate > empirical[best].rate {
            best = i;
        }
    }
    for (i, o) in empirical.iter().enumerate() {
        let analytic = finite_selected_rate(o.eta_th, &channel, &state, &rx, &sec);
        csv.row(&[
            fmt(o.eta_th),
            o.n_post.to_string(),
            o.ell.to_string(),
            fmt(o.rate),
            fmt(analytic.rate),
            u8::from(i == best).to_string(),
        ])?;
    }
    outcome.files.push(csv.finish()?);
    outcome.no_key = empirical[best].ell == 0;
    outcome.summary.push(format!(
        "simulated {} pulses in {} bins; best cutoff {:.4} with rate {:.4e}",
        settings.n_pulses,
        log.bins.len(),
        empirical[best].eta_th,
        empirical[best].rate
    ));

    if config.output.plot {
        let plot = dir.join("empirical_rates.svg");
        let analytic_series: Vec<(f64, f64)> = grid
            .iter()
            .map(|&t| (t, finite_selected_rate(t, &channel, &state, &rx, &sec).rate))
            .collect();
        svg_line_plot(
            &plot,
            "empirical vs analytic selected key rate",
            "eta_th",
            "rate (bits/pulse)",
            &[
                Series {
                    label: "empirical".into(),
                    points: empirical.iter().map(|o| (o.eta_th, o.rate)).collect(),
                },
                Series {
                    label: "analytic".into(),
                    points: analytic_series,
                },
            ],
            true,
        )?;
        outcome.files.push(plot);
    }
    Ok(outcome)
}

/// Optimal threshold for one assumed channel: optimize the state
/// (selection-aware), then locate the argmax on a fine threshold grid.
fn optimal_threshold_point(
    config: &ScenarioConfig,
    loss_db: f64,
    sigma: f64,
    n_pulses: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let channel = ChannelParams::from_loss_db(loss_db, sigma)?;
    let sec = config.security.params()?.with_n_total(n_pulses);
    let rx = config.receiver.model()?;
    let problem = OptimizationProblem::new(channel, rx.clone(), sec)
        .with_policy(ThresholdPolicy::OptimalScan(config.selection.grid()?))
        .with_starts(config.protocol.starts);
    let optimized = optimize_state(&problem, seed)?;

    let fine: Vec<f64> = (0..=160).map(|i| i as f64 * 5e-4).collect();
    let scan = arts_scan(&fine, &channel, &optimized.state, &rx, &sec)?;
    let best = scan.best_outcome();
    Ok((best.eta_th, best.rate))
}

fn threshold_study(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let mut csv = CsvWriter::create(
        dir,
        "threshold_study.csv",
        "threshold-study",
        config,
        &[
            "study",
            "loss_db",
            "sigma",
            "n_pulses",
            "opt_eta_th",
            "best_rate",
        ],
    )?;

    let sigma0 = config.channel.sigma;
    let mut vs_n_series: Vec<Series> = vec![];
    for (i, &loss) in config.study.loss_list.iter().enumerate() {
        let mut pts = vec![];
        for (j, &n) in config.study.n_list.iter().enumerate() {
            let seed = mix_seed(config.simulation.seed, (1 + i * 97 + j) as u64);
            let (opt, rate) = optimal_threshold_point(config, loss, sigma0, n, seed)?;
            csv.row(&[
                "vs_n".into(),
                fmt(loss),
                fmt(sigma0),
                format!("{n:e}"),
                fmt(opt),
                fmt(rate),
            ])?;
            pts.push((n.log10(), opt));
        }
        vs_n_series.push(Series {
            label: format!("{loss} dB"),
            points: pts,
        });
    }

    let mut vs_loss_series: Vec<Series> = vec![];
    let n0 = config.security.n_pulses;
    for (i, &sigma) in config.study.sigma_list.iter().enumerate() {
        let mut pts = vec![];
        for (j, &loss) in config.study.loss_list.iter().enumerate() {
            let seed = mix_seed(config.simulation.seed, (100_000 + i * 211 + j) as u64);
            let (opt, rate) = optimal_threshold_point(config, loss, sigma, n0, seed)?;
            csv.row(&[
                "vs_loss".into(),
                fmt(loss),
                fmt(sigma),
                format!("{n0:e}"),
                fmt(opt),
                fmt(rate),
            ])?;
            pts.push((loss, opt));
        }
        vs_loss_series.push(Series {
            label: format!("sigma {sigma}"),
            points: pts,
        });
    }
    outcome.files.push(csv.finish()?);
    outcome.summary.push("threshold study written".into());

    if config.output.plot {
        if !config.study.n_list.is_empty() {
            let p = dir.join("threshold_vs_n.svg");
            svg_line_plot(
                &p,
                "optimal cutoff vs sent pulses",
                "log10 N",
                "optimal eta_th",
                &vs_n_series,
                false,
            )?;
            outcome.files.push(p);
        }
        if !config.study.sigma_list.is_empty() {
            let p = dir.join("threshold_vs_loss.svg");
            svg_line_plot(
                &p,
                "optimal cutoff vs mean loss",
                "mean loss (dB)",
                "optimal eta_th",
                &vs_loss_series,
                false,
            )?;
            outcome.files.push(p);
        }
    }
    Ok(outcome)
}

fn improvement(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let target = config.study.target_rate;
    let sigma = config.channel.sigma;
    let grid = config.selection.grid()?;

    let mut csv = CsvWriter::create(
        dir,
        "improvement.csv",
        "improvement",
        config,
        &[
            "y0",
            "eta_d",
            "loss_with_selection_db",
            "loss_without_db",
            "extension_db",
        ],
    )?;

    for &y0 in &config.study.y0_list {
        let rx = presets::uniform_noise_receiver(y0, config.study.eta_d)?;
        // one selection-aware optimization per probed loss; the same state
        // is evaluated with and without the cutoff
        let rate_pair = |loss_db: f64| -> Result<(f64, f64)> {
            let channel = ChannelParams::from_loss_db(loss_db, sigma)?;
            let sec = config.security.params()?;
            let problem = OptimizationProblem::new(channel, rx.clone(), sec)
                .with_policy(ThresholdPolicy::OptimalScan(grid.clone()))
                .with_starts(config.protocol.starts);
            let seed = mix_seed(config.simulation.seed, loss_db.to_bits());
            let optimized = optimize_state(&problem, seed)?;
            let unselected = finite_selected_rate(0.0, &channel, &optimized.state, &rx, &sec).rate;
            Ok((optimized.rate, unselected))
        };

        let max_loss = |selected: bool| -> Result<Option<f64>> {
            let reaches = |db: f64| -> Result<bool> {
                let (with_sel, without) = rate_pair(db)?;
                Ok(if selected {
                    with_sel >= target
                } else {
                    without >= target
                })
            };
            let (mut lo, mut hi) = (5.0, 45.0);
            if !reaches(lo)? {
                return Ok(None);
            }
            if reaches(hi)? {
                return Ok(Some(hi));
            }
            while hi - lo > 0.02 {
                let mid = 0.5 * (lo + hi);
                if reaches(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(Some(0.5 * (lo + hi)))
        };

        match (max_loss(true)?, max_loss(false)?) {
            (Some(with_sel), Some(without)) => {
                let extension = with_sel - without;
                csv.row(&[
                    format!("{y0:e}"),
                    fmt(config.study.eta_d),
                    format!("{with_sel:.3}"),
                    format!("{without:.3}"),
                    format!("{extension:.3}"),
                ])?;
                outcome.summary.push(format!(
                    "Y0 = {y0:e}: reach {with_sel:.2} dB with selection vs {without:.2} dB without (+{extension:.2} dB)"
                ));
            }
            _ => {
                csv.comment(&format!("y0 = {y0:e}: target rate unreachable at 5 dB"))?;
                outcome.no_key = true;
            }
        }
    }
    outcome.files.push(csv.finish()?);
    Ok(outcome)
}

fn calibrate(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let mut outcome = RunOutcome::new();
    let p = &config.probe;
    if p.points < 2 || !(p.eta_min >= 0.0 && p.eta_max <= 1.0 && p.eta_min < p.eta_max) {
        return Err(Error::domain(
            "probe section needs points >= 2 and 0 <= eta_min < eta_max <= 1",
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.simulation.seed);

    let mut points = CsvWriter::create(
        dir,
        "calibration_points.csv",
        "calibrate",
        config,
        &["area", "eta_programmed"],
    )?;
    let mut pairs = Vec::with_capacity(p.points);
    for i in 0..p.points {
        let eta = p.eta_min + (p.eta_max - p.eta_min) * i as f64 / (p.points - 1) as f64;
        let frame = probe::synth_probe(eta, p.noise * eta, &mut rng)?;
        let area = match probe::gaussian_fit(&frame) {
            Ok(fit) => fit.area,
            // weak pulses drown in noise; the frame sum still estimates them
            Err(Error::FitFailure(_)) => probe::frame_sum(&frame),
            Err(e) => return Err(e),
        };
        pairs.push((area, eta));
        points.row(&[fmt(area), fmt(eta)])?;
    }
    outcome.files.push(points.finish()?);

    let cal = probe::calibrate(&pairs, p.degree)?;
    let poly_path = dir.join("calibration_poly.txt");
    let mut poly_file = std::io::BufWriter::new(std::fs::File::create(&poly_path)?);
    cal.write_text(&mut poly_file)?;
    drop(poly_file);
    outcome.files.push(poly_path);

    // fresh frames through the full round trip
    let mut roundtrip = CsvWriter::create(
        dir,
        "roundtrip.csv",
        "calibrate",
        config,
        &["eta_programmed", "eta_recovered", "clamped"],
    )?;
    let trials = 4 * p.points;
    let mut sq_sum = 0.0;
    for i in 0..trials {
        let eta =
            p.eta_min + (p.eta_max - p.eta_min) * (i % p.points) as f64 / (p.points - 1) as f64;
        let frame = probe::synth_probe(eta, p.noise * eta, &mut rng)?;
        let area = match probe::gaussian_fit(&frame) {
            Ok(fit) => fit.area,
            Err(Error::FitFailure(_)) => probe::frame_sum(&frame),
            Err(e) => return Err(e),
        };
        let (recovered, clamped) = probe::invert(&cal, area);
        sq_sum += (recovered - eta) * (recovered - eta);
        roundtrip.row(&[fmt(eta), fmt(recovered), u8::from(clamped).to_string()])?;
    }
    let rms = (sq_sum / trials as f64).sqrt();
    roundtrip.comment(&format!("round-trip rms error = {rms:e}"))?;
    outcome.files.push(roundtrip.finish()?);

    // one example frame in the two-column text format
    let wave_path = dir.join("sample_waveform.txt");
    let mid_eta = 0.5 * (p.eta_min + p.eta_max);
    let frame = probe::synth_probe(mid_eta, p.noise * mid_eta, &mut rng)?;
    let mut wave_file = std::io::BufWriter::new(std::fs::File::create(&wave_path)?);
    frame.write_text(&mut wave_file)?;
    drop(wave_file);
    outcome.files.push(wave_path);

    outcome
        .summary
        .push(format!("calibration round-trip rms error = {rms:.4e}"));
    Ok(outcome)
}
