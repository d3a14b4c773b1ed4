use std::collections::BTreeMap;
use std::io::Write;

use dryfric_core::kolmogorov::{
    assemble, check_memory, default_laplace_grid, f0_from_laplace, f_stick_at_zero, harmonic_measure,
    laplace_slid_with, laplace_stick_from, modified_assemble, psd_with, stationary_measure_grid,
    stationary_statistics_with, Grid, SolverOptions, StationaryDet,
};
use dryfric_core::mc_stats::{
    duration_histograms, f0_from_samples, stationary_statistics, stick_f0_from_entries, welch_psd, write_statistics_csv,
};
use dryfric_core::sim::{replica_rng, simulate_excursions, Side};
use dryfric_core::{extrapolate, Error, Excursion, Simulator, Statistic};

use crate::config::Resolved;
use crate::output::{create, finish, num};
use crate::CliError;

/// Histogram bin width for the densities at `0+`, in units of the mean
/// time between forcing jumps.
const F0_BIN_JUMPS: f64 = 0.5;

fn simulator(run: &Resolved) -> Result<Simulator, CliError> {
    let sim = Simulator::new(run.config.params)?;
    Ok(match run.config.event_cap {
        Some(cap) => sim.with_event_cap(cap),
        None => sim,
    })
}

fn excursions(run: &Resolved) -> Result<Vec<Excursion>, CliError> {
    let sim = simulator(run)?;
    Ok(simulate_excursions(&sim, run.config.n_excursions, run.config.params.seed)?)
}

fn solver_options(run: &Resolved) -> SolverOptions {
    SolverOptions { memory_budget: run.config.memory_budget, ..Default::default() }
}

fn checked_grid(run: &Resolved, p: u32, elem_bytes: usize) -> Result<Grid, CliError> {
    let grid = Grid::new(run.config.params, p)?;
    check_memory(&grid, elem_bytes, run.config.memory_budget)?;
    Ok(grid)
}

pub fn simulate(run: &Resolved) -> Result<(), CliError> {
    let ex = excursions(run)?;
    let stats = stationary_statistics(&ex)?;
    let rows: Vec<(String, _)> = stats.iter().map(|(s, e)| (s.name().to_string(), *e)).collect();
    let (mut w, path) = create(run, "statistics.csv")?;
    write_statistics_csv(&mut w, &rows)?;
    finish(w, path)?;
    let h = duration_histograms(&ex, run.config.nbins, None)?;
    for (name, hist) in [("stick", &h.stick), ("slide", &h.slide), ("excursion", &h.excursion)] {
        let (mut w, path) = create(run, &format!("hist_{name}.csv"))?;
        hist.write_csv(&mut w)?;
        finish(w, path)?;
    }
    for (s, e) in &stats {
        println!("{:>3} {:.6} +- {:.6}  ({})", s.name(), e.value, e.hi95 - e.value, s.description());
    }
    Ok(())
}

fn solve_all(run: &Resolved, p: u32) -> Result<StationaryDet, CliError> {
    let grid = checked_grid(run, p, 8)?;
    Ok(stationary_statistics_with(&assemble(&grid), run.config.lambda, solver_options(run))?)
}

pub fn solve(run: &Resolved) -> Result<(), CliError> {
    let c = &run.config;
    let (mut w, path) = create(run, "solve.csv")?;
    writeln!(w, "statistic,delta,p,lambda,value")?;
    let mut reports = Vec::new();
    for &p in &c.p {
        let det = solve_all(run, p)?;
        for stat in Statistic::ALL {
            writeln!(w, "{},{},{},{},{}", stat.name(), num(c.params.delta), p, num(c.lambda), num(det.value(stat)))?;
        }
        let r = det.report;
        println!(
            "p = {p}: {} nodes, {} factorization(s), {} solves, residual {:.2e}",
            r.nodes, r.factorizations, r.solves, r.max_residual
        );
        reports.push(serde_json::json!({ "p": p, "report": r }));
    }
    finish(w, path)?;
    let report_path = run.output_dir().join("solve_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
    println!("wrote {}", report_path.display());
    Ok(())
}

pub fn durations(run: &Resolved) -> Result<(), CliError> {
    let c = &run.config;
    let params = c.params;
    let grid = checked_grid(run, c.p[0], 8)?;
    let m = assemble(&grid);
    let mop = modified_assemble(&grid);
    let hm = harmonic_measure(&m)?;
    let lambdas = c.lambda_grid.clone().unwrap_or_else(|| default_laplace_grid(&params));

    let (mut w, path) = create(run, "laplace.csv")?;
    writeln!(w, "lambda,F_stick,F_slid_G,F_slid_w")?;
    let mut stick = BTreeMap::new();
    let mut slide = BTreeMap::new();
    for &l in &lambdas {
        let fs = laplace_stick_from(&hm, &params, l)?;
        let sl = laplace_slid_with(&m, &mop, l)?;
        writeln!(w, "{},{},{},{}", num(l), num(fs), num(sl.via_g), num(sl.via_w))?;
        stick.insert(l.to_bits(), fs);
        slide.insert(l.to_bits(), sl.via_g);
    }
    finish(w, path)?;
    let stick0 = f0_from_laplace(|l| Ok(stick[&l.to_bits()]), &lambdas)?;
    let slide0 = f0_from_laplace(|l| Ok(slide[&l.to_bits()]), &lambdas)?;
    let exact = f_stick_at_zero(&hm, &params);

    let (mut w, path) = create(run, "durations_f0.csv")?;
    writeln!(w, "method,phase,f0,stderr,note")?;
    let tail = |ok: bool| if ok { "monotone tail" } else { "non-monotone tail" };
    writeln!(w, "kolmogorov,stick,{},,{}", num(stick0.value), tail(stick0.monotone_tail))?;
    writeln!(w, "kolmogorov_limit,stick,{},,closed-form large-lambda limit", num(exact))?;
    writeln!(w, "kolmogorov,slide,{},,{}", num(slide0.value), tail(slide0.monotone_tail))?;
    println!("Kolmogorov: f_stick(0+) = {:.4} (limit {:.4}), f_slide(0+) = {:.4}", stick0.value, exact, slide0.value);
    if c.mc {
        let ex = excursions(run)?;
        let width = F0_BIN_JUMPS / params.jump_rate();
        let stick_t: Vec<f64> = ex.iter().map(|e| e.stick_duration()).collect();
        let slide_t: Vec<f64> = ex.iter().map(|e| e.slide_duration()).collect();
        let hs = f0_from_samples(&stick_t, width)?;
        let cond = stick_f0_from_entries(&ex, &params)?;
        let note = format!("two bins of width {width:.3e}");
        writeln!(w, "mc_histogram,stick,{},{},first bin; {note}", num(hs.first_bin), num(hs.first_bin_stderr))?;
        writeln!(w, "mc_histogram_linear,stick,{},{},{note}", num(hs.linear), num(hs.linear_stderr))?;
        writeln!(w, "mc_entry_node,stick,{},{},conditional on the static entry node", num(cond.value), num(cond.stderr))?;
        let sl = match f0_from_samples(&slide_t, width) {
            Ok(f) => format!("{},{}", num(f.first_bin), num(f.first_bin_stderr)),
            Err(Error::EmptyBins) => format!("{},", num(0.0)),
            Err(e) => return Err(e.into()),
        };
        writeln!(w, "mc_histogram,slide,{sl},first bin; {note}")?;
        println!(
            "Monte Carlo: f_stick(0+) = {:.4} +- {:.4} (first bin), {:.4} (linear), {:.4} +- {:.4} (entry node)",
            hs.first_bin, hs.first_bin_stderr, hs.linear, cond.value, cond.stderr
        );
    }
    finish(w, path)
}

pub fn psd(run: &Resolved) -> Result<(), CliError> {
    let c = &run.config;
    let omegas = c.omega_grid.values();
    let grid = checked_grid(run, c.p[0], 16)?;
    let m = assemble(&grid);
    let pi = stationary_measure_grid(&m)?;
    let s = psd_with(&m, &pi, &omegas)?;
    let mc = if c.mc {
        let sim = simulator(run)?;
        let mut rng = replica_rng(c.params.seed, 0);
        let path = sim.simulate_path(c.path_length, sim.exit_point(Side::Plus), &mut rng)?;
        let x = path.sample_velocity(c.sample_dt);
        let pg = welch_psd(&x, c.sample_dt, c.welch_segment)?;
        let (mut w, p) = create(run, "psd_mc.csv")?;
        writeln!(w, "omega,S_mc")?;
        for (o, v) in pg.omega.iter().zip(&pg.power) {
            writeln!(w, "{},{}", num(*o), num(*v))?;
        }
        finish(w, p)?;
        let spacing = omegas.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
        let half = (0.5 * spacing).max(pg.omega[1]);
        Some(omegas.iter().map(|o| pg.band_mean(o.abs() - half, o.abs() + half)).collect::<Vec<_>>())
    } else {
        None
    };
    let (mut w, path) = create(run, "psd.csv")?;
    match &mc {
        Some(_) => writeln!(w, "omega,S_v,S_mc")?,
        None => writeln!(w, "omega,S_v")?,
    }
    for (k, (o, v)) in omegas.iter().zip(&s).enumerate() {
        match &mc {
            Some(m) => {
                let x = m[k].map(num).unwrap_or_default();
                writeln!(w, "{},{},{}", num(*o), num(*v), x)?
            }
            None => writeln!(w, "{},{}", num(*o), num(*v))?,
        }
    }
    finish(w, path)
}

pub fn extrapolate(run: &Resolved) -> Result<(), CliError> {
    let cfg = run
        .config
        .extrapolate
        .as_ref()
        .ok_or_else(|| CliError::Config("extrapolate needs an 'extrapolate' section with input and targets".into()))?;
    let file = std::fs::File::open(&cfg.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", cfg.input.display())))?;
    let g = extrapolate::StatGrid::read_csv(std::io::BufReader::new(file))?;
    let out = extrapolate::propagate(&g, &cfg.targets)?;
    let (mut w, path) = create(run, "extrapolated.csv")?;
    out.write_csv(&mut w)?;
    for &(k, l) in &cfg.targets {
        if let Some(cell) = out.cell(k, l) {
            println!("({k},{l}) {:.6} {}", cell.value, cell.provenance.name());
        }
    }
    finish(w, path)
}

pub fn kappa(run: &Resolved) -> Result<(), CliError> {
    let c = &run.config;
    if c.p.iter().any(|&p| p < 2 || p % 2 != 0) {
        return Err(CliError::Config("kappa needs even p >= 2 (it uses p/2, p and 2p)".into()));
    }
    let mut cache: BTreeMap<u32, StationaryDet> = BTreeMap::new();
    let (mut w, path) = create(run, "kappa.csv")?;
    writeln!(w, "statistic,delta,p,kappa,value_half,value_p,value_double")?;
    for &p in &c.p {
        for q in [p / 2, p, 2 * p] {
            if !cache.contains_key(&q) {
                cache.insert(q, solve_all(run, q)?);
            }
        }
        let (a, b, f) = (&cache[&(p / 2)], &cache[&p], &cache[&(2 * p)]);
        for stat in Statistic::ALL {
            let scale = |d: &StationaryDet| -> Result<Vec<f64>, CliError> {
                let full: Vec<f64> = d.u[&stat].iter().map(|x| x * d.lambda).collect();
                Ok(d.grid.restrict(&full, &a.grid)?)
            };
            let k = dryfric_core::kolmogorov::kappa(&scale(a)?, &scale(b)?, &scale(f)?)?;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                stat.name(),
                num(c.params.delta),
                p,
                num(k),
                num(a.value(stat)),
                num(b.value(stat)),
                num(f.value(stat))
            )?;
            println!("{} p = {p}: kappa = {k:.4}", stat.name());
        }
        cache.retain(|&q, _| q >= p);
    }
    finish(w, path)
}
