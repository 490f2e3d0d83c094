use std::f64::consts::PI;
use std::fs;
use std::io::{self, ErrorKind};
use std::path::Path;

use needlets::asymptotics::{
    c3_bessel, constant, cq_transform, exact_variance_table, write_constants_csv, write_exact_variance_csv,
};
use needlets::mcharness::{
    cumulant_ratio_table, excursion_clt_table, summarize, variance_table, write_cumulant_csv, write_distance_csv,
    write_excursion_csv, write_nu_samples_csv, write_phi_samples_csv, write_variance_csv, ExperimentConfig,
    ExperimentReport, ReplicateRecord, ScaleRun, ScaleSamples, Statistic,
};
use needlets::model::band_profile;
use needlets::polyspectra::required_degree;

use crate::config::{check_js, check_qs, RunConfig};
use crate::error::CliError;
use crate::output::{emit, print_table};

/// Replicates per on-disk chunk.
const CHUNK: u64 = 50;

pub fn constants(cfg: &RunConfig, dry_run: bool) -> Result<(), CliError> {
    let qs = &cfg.experiment.q;
    check_qs(qs)?;
    let alpha = cfg.spectrum.alpha;
    if dry_run {
        for &q in qs {
            let routes = match q {
                2 => "closed_q2",
                3 => "wigner_q3, bessel_q3",
                4 => "wigner_q4, bessel_generic",
                _ => "bessel_generic",
            };
            println!("q = {q}: {routes}");
        }
        return Ok(());
    }
    let w = needlets::NeedletWindow::new(cfg.window.grid_size)?;
    let mut rows = Vec::new();
    for &q in qs {
        let primary = constant(q, &w, alpha)?;
        rows.push(primary);
        let second = match q {
            3 => Some(c3_bessel(&w, alpha)?),
            4 => Some(cq_transform(4, &w, alpha)?),
            _ => None,
        };
        if let Some(b) = second {
            let rel = (primary.value - b.value).abs() / primary.value;
            eprintln!("q = {q}: {} vs {} relative difference {rel:.3e}", primary.route, b.route);
            rows.push(b);
        }
        if primary.flagged {
            eprintln!("warning: c_{q} positivity is not resolved by the quadrature error");
        }
    }
    for c in &rows {
        println!("c_{} [{}] = {:.12} ± {:.2e}", c.q, c.route, c.value, c.quadrature_error);
    }
    emit(cfg, "constants", |buf| write_constants_csv(&rows, buf))
}

pub fn variance(cfg: &RunConfig, dry_run: bool) -> Result<(), CliError> {
    let (js, qs) = (&cfg.experiment.j, &cfg.experiment.q);
    check_js(js)?;
    check_qs(qs)?;
    let s = cfg.spectrum_model()?;
    let w = needlets::NeedletWindow::new(cfg.window.grid_size)?;
    if dry_run {
        for &j in js {
            let deg = band_profile(&s, &w, j)?.degree();
            for &q in qs {
                println!("j = {j}, q = {q}: {} Gauss nodes", (q * deg).div_ceil(2) + 1);
            }
        }
        return Ok(());
    }
    let rows = exact_variance_table(&s, &w, cfg.spectrum.alpha, js, qs)?;
    for r in &rows {
        println!("j = {:2} q = {}: scaled {:.10e}, ratio to c_q {:.6}", r.j, r.q, r.scaled, r.ratio_to_cq);
    }
    emit(cfg, "variance_exact", |buf| write_exact_variance_csv(&rows, buf))
}

pub fn mc(cfg: &RunConfig, dry_run: bool) -> Result<(), CliError> {
    let ec = cfg.experiment_config();
    check_js(&ec.js)?;
    check_qs(&ec.qs)?;
    ec.validate()?;
    if dry_run {
        return print_plan(cfg, &ec);
    }
    let scales = simulate(cfg, &ec)?;
    let summaries = summarize(&ec, &scales)?;
    let report = ExperimentReport { config: ec.clone(), scales, summaries };

    let rows = variance_table(&report)?;
    for r in &rows {
        println!(
            "j = {} q = {}: var_mc {:.6e} ± {:.2e}, exact {:.6e}, ratio {:.4}",
            r.j, r.q, r.var_mc, r.se, r.var_exact, r.ratio
        );
    }
    emit(cfg, "variance", |buf| write_variance_csv(&rows, buf))?;
    if ec.js.len() >= 2 {
        let mut cum = Vec::new();
        for &q in &ec.qs {
            cum.extend(cumulant_ratio_table(&report, q)?);
        }
        emit(cfg, "cumulant", |buf| write_cumulant_csv(&cum, buf))?;
    }
    let nu_stats: Vec<_> =
        report.summaries.iter().filter(|s| matches!(s.stat, Statistic::Polyspectrum(_))).cloned().collect();
    emit(cfg, "distance", |buf| write_distance_csv(&nu_stats, buf))?;
    emit(cfg, "nu_samples", |buf| write_nu_samples_csv(&ec.qs, &report.scales, buf))
}

pub fn excursion(cfg: &RunConfig, dry_run: bool) -> Result<(), CliError> {
    let ec = cfg.experiment_config();
    check_js(&ec.js)?;
    if ec.zs.is_empty() {
        return Err(CliError::Config("z list must not be empty".into()));
    }
    if !ec.qs.is_empty() {
        check_qs(&ec.qs)?;
    }
    ec.validate()?;
    if dry_run {
        return print_plan(cfg, &ec);
    }
    let scales = simulate(cfg, &ec)?;
    if let Some(k0) = ec.zs.iter().position(|&z| z == 0.0) {
        let worst = scales
            .iter()
            .flat_map(|sc| &sc.records)
            .map(|r| (r.defect - (4.0 * PI - 2.0 * r.phis[k0])).abs())
            .fold(0.0, f64::max);
        println!("defect identity: max deviation {worst:.3e}");
        if worst > 1e-12 {
            return Err(CliError::Numeric(needlets::Error::Degenerate(format!(
                "defect identity violated by {worst:.3e}"
            ))));
        }
    }
    let report = ExperimentReport { config: ec.clone(), scales, summaries: Vec::new() };
    let mut rows = Vec::new();
    for &z in &ec.zs {
        rows.extend(excursion_clt_table(&report, z)?);
    }
    for r in &rows {
        println!(
            "j = {} z = {:+}: mean {:.6} ± {:.2e} (4πΦ(z) = {:.6}), W1 {:.4} ± {:.4}, σ_N² {:.4}",
            r.j, r.z, r.mean, r.se_mean, r.exact_mean, r.w1, r.se_w1, r.sigma_n_sq
        );
    }
    emit(cfg, "excursion", |buf| write_excursion_csv(&rows, buf))?;
    emit(cfg, "phi_samples", |buf| write_phi_samples_csv(&ec.zs, &report.scales, buf))
}

pub fn report(cfg: &RunConfig, _dry_run: bool) -> Result<(), CliError> {
    let names = ["constants", "variance_exact", "variance", "cumulant", "distance", "excursion"];
    let mut found = false;
    for n in names {
        found |= print_table(&cfg.output.dir.join(format!("{n}.csv")))?;
    }
    if !found {
        return Err(CliError::Io(io::Error::new(
            ErrorKind::NotFound,
            format!("no tables in {}", cfg.output.dir.display()),
        )));
    }
    Ok(())
}

fn print_plan(cfg: &RunConfig, ec: &ExperimentConfig) -> Result<(), CliError> {
    let threads = cfg.experiment.threads.unwrap_or_else(rayon::current_num_threads);
    println!("replicates {} per scale, seed {}, {threads} threads", ec.replicates, ec.master_seed);
    for &j in &ec.js {
        let d = ec.rule_degree(j);
        let (n_theta, n_phi) = ((d + 2) / 2, d + 1);
        let nodes = n_theta * n_phi;
        let (lo, hi) = ((1usize << (j - 1)) as f64, (1usize << (j + 1)) as f64);
        let cache = n_theta as f64 * (hi * hi - lo * lo) / 2.0 * 8.0;
        let fields = (nodes * 8 * threads) as f64;
        println!(
            "j = {j}: degree {d}, {n_theta} x {n_phi} = {nodes} nodes, ~{:.1} MiB",
            (cache + fields) / (1024.0 * 1024.0)
        );
    }
    Ok(())
}

fn fingerprint(ec: &ExperimentConfig) -> String {
    // FNV-1a over the full configuration
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{ec:?}").bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

fn encode_chunk(records: &[ReplicateRecord]) -> String {
    records
        .iter()
        .map(|r| {
            format!("{};{};{};{:e};{}\n", r.replicate_id, join(&r.nus), join(&r.phis), r.defect, join(&r.truncated))
        })
        .collect()
}

fn bad_chunk(path: &Path) -> CliError {
    CliError::Io(io::Error::new(ErrorKind::InvalidData, format!("corrupt chunk {}", path.display())))
}

fn decode_chunk(path: &Path, expected: std::ops::Range<u64>) -> Result<Vec<ReplicateRecord>, CliError> {
    let text = fs::read_to_string(path)?;
    let floats = |s: &str| -> Option<Vec<f64>> {
        if s.is_empty() {
            Some(Vec::new())
        } else {
            s.split(',').map(|x| x.parse().ok()).collect()
        }
    };
    let records = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(';').collect();
            if f.len() != 5 {
                return None;
            }
            Some(ReplicateRecord {
                replicate_id: f[0].parse().ok()?,
                nus: floats(f[1])?,
                phis: floats(f[2])?,
                defect: f[3].parse().ok()?,
                truncated: floats(f[4])?,
            })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad_chunk(path))?;
    if !records.iter().map(|r| r.replicate_id).eq(expected) {
        return Err(bad_chunk(path));
    }
    Ok(records)
}

/// Runs all replicates in chunks, reusing chunks already completed on disk.
fn simulate(cfg: &RunConfig, ec: &ExperimentConfig) -> Result<Vec<ScaleSamples>, CliError> {
    let s = ec.spectrum()?;
    let w = ec.window()?;
    let root = cfg.output.dir.join("chunks").join(fingerprint(ec));
    let r = ec.replicates as u64;
    let mut scales = Vec::with_capacity(ec.js.len());
    for &j in &ec.js {
        let dir = root.join(format!("j{j}"));
        fs::create_dir_all(&dir)?;
        let run = ScaleRun::new(ec, &s, &w, j)?;
        eprintln!(
            "j = {j}: {r} replicates on {} nodes (degree {})",
            run.node_count(),
            required_degree(j, ec.max_order())
        );
        let mut records = Vec::with_capacity(ec.replicates);
        let (mut reused, mut computed) = (0, 0);
        for k in 0..r.div_ceil(CHUNK) {
            let ids = k * CHUNK..((k + 1) * CHUNK).min(r);
            let data = dir.join(format!("chunk_{k:06}.txt"));
            let marker = dir.join(format!("chunk_{k:06}.done"));
            if marker.exists() {
                records.extend(decode_chunk(&data, ids)?);
                reused += 1;
                continue;
            }
            let recs = run.replicates(&s, ec.master_seed, ids)?;
            let tmp = data.with_extension("tmp");
            fs::write(&tmp, encode_chunk(&recs))?;
            fs::rename(&tmp, &data)?;
            fs::write(&marker, b"")?;
            records.extend(recs);
            computed += 1;
        }
        eprintln!("j = {j}: {computed} chunks computed, {reused} reused");
        scales.push(ScaleSamples { j, records });
    }
    Ok(scales)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_roundtrip_is_exact() {
        let recs = vec![
            ReplicateRecord {
                replicate_id: 3,
                nus: vec![0.1 + 0.2, -1e-300],
                phis: vec![],
                defect: 4.0 * PI,
                truncated: vec![],
            },
            ReplicateRecord {
                replicate_id: 4,
                nus: vec![1.0 / 3.0, 7.0],
                phis: vec![],
                defect: 0.0,
                truncated: vec![],
            },
        ];
        let dir = std::env::temp_dir().join(format!("needlets-chunk-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.txt");
        fs::write(&p, encode_chunk(&recs)).unwrap();
        assert_eq!(decode_chunk(&p, 3..5).unwrap(), recs);
        assert!(decode_chunk(&p, 0..2).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn fingerprint_tracks_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { master_seed: 1, ..a.clone() };
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
    }
}
