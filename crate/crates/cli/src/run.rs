//! Subcommand bodies. Every config problem surfaces before the run directory is touched.

use crate::config::{Backend, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{
    index_header, index_values, num, series_csv, snapshot_name, write_into, write_snapshots,
    Staging,
};
use nfsf_core::direct::{
    boundary_bound, weak_moment_residual, DirectRun, DirectSolver, SolverConfig, TestFunction,
};
use nfsf_core::equilibrium::high_noise_threshold;
use nfsf_core::gridcell::{check_nonlinear_condition4, run4, shift_condition, stefan4};
use nfsf_core::model::io::decode_binary;
use nfsf_core::model::{Coupling, DensityField};
use nfsf_core::stability::{
    entropy_trace, measure_decay, poincare_constant, stability_report, summed_entropy,
    ConditionRecord,
};
use nfsf_core::stefan::{StefanRun, StefanSolver};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Stefan,
    Equilibrium,
    StabilityCheck,
    Gridcell,
    Crosscheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stefan => "stefan",
            Command::Equilibrium => "equilibrium",
            Command::StabilityCheck => "stability-check",
            Command::Gridcell => "gridcell",
            Command::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub snapshot_stride: Option<usize>,
}

pub fn load(path: &Path, ov: Overrides) -> Result<(String, Resolved), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        line: 0,
        column: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let (Some(stride), Some(s)) = (ov.snapshot_stride, cfg.solver.as_mut()) {
        s.snapshot_stride = stride;
    }
    let res = cfg.resolve(&text)?;
    Ok((text, res))
}

/// Checks that depend on the subcommand, still before any output exists.
fn preflight(cmd: Command, res: &Resolved, text: &str) -> Result<(), CliError> {
    match cmd {
        Command::Simulate => res.solver_config(text).map(|_| ()),
        Command::Stefan => res.stefan_config(text).map(|_| ()),
        Command::Gridcell => {
            res.population_set(text)?;
            match res.config.gridcell.as_ref().unwrap().backend {
                Backend::Direct => res.solver_config(text).map(|_| ()),
                Backend::Stefan => res.stefan_config(text).map(|_| ()),
            }
        }
        Command::Crosscheck => {
            let dc = res.solver_config(text)?;
            let sc = res.stefan_config(text)?;
            let ratio = sc.snapshot_dt / dc.dt;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
                let (line, column) = crate::config::locate(text, "solver.dt");
                return Err(CliError::Config {
                    line,
                    column,
                    message: "solver.dt must divide stefan.snapshot_dt so the backends share output times".into(),
                });
            }
            Ok(())
        }
        Command::Equilibrium | Command::StabilityCheck => Ok(()),
    }
}

/// Run one subcommand into `out`. Solver failures still leave `config.json` and `diagnostics.json`.
pub fn execute(cmd: Command, config: &Path, out: &Path, ov: Overrides) -> Result<(), CliError> {
    let (text, res) = load(config, ov)?;
    preflight(cmd, &res, &text)?;
    let mut st = Staging::new(out)?;
    let outcome = st
        .write("config.json", res.config.to_json())
        .map_err(CliError::from)
        .and_then(|_| match cmd {
            Command::Simulate => simulate(&res, &text, &mut st),
            Command::Stefan => stefan(&res, &text, &mut st),
            Command::Equilibrium => equilibrium(&res, &mut st),
            Command::StabilityCheck => stability_check(&res, &text, &mut st),
            Command::Gridcell => gridcell(&res, &text, &mut st),
            Command::Crosscheck => crosscheck(&res, &text, &mut st),
        });
    match outcome {
        Ok(pops) => {
            let manifest = json!({
                "command": cmd.name(),
                "seed": res.config.seed,
                "populations": pops,
                "files": st.files(),
            });
            st.write("manifest.json", pretty(&manifest))?;
            st.commit()?;
            Ok(())
        }
        Err(CliError::Solver(e)) => {
            let dump = json!({
                "command": cmd.name(),
                "error": e.to_string(),
                "detail": format!("{e:?}"),
                "seed": res.config.seed,
                "equilibrium": res.equilibrium,
            });
            st.write("diagnostics.json", pretty(&dump))?;
            st.commit()?;
            Err(CliError::Solver(e))
        }
        Err(e) => {
            st.discard();
            Err(e)
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

type Table = Vec<Vec<Vec<f64>>>;

fn direct_tables(run: &DirectRun) -> (Table, Table) {
    let means = run
        .snapshots
        .iter()
        .map(|s| s.iter().map(|f| f.mean_activity()).collect())
        .collect();
    let traces = run
        .snapshots
        .iter()
        .map(|s| s.iter().map(|f| f.boundary_trace()).collect())
        .collect();
    (means, traces)
}

fn stefan_tables(run: &StefanRun) -> (Table, Table) {
    (
        run.times.iter().map(|t| run.mean_at(*t)).collect(),
        run.times.iter().map(|t| run.boundary_at(*t)).collect(),
    )
}

/// Snapshots, `mean_activity.csv`, `boundary.csv` and `mass.csv`, shared by both backends.
fn write_trajectory(
    res: &Resolved,
    st: &mut Staging,
    times: &[f64],
    snapshots: &[Vec<DensityField>],
    (means, traces): (Table, Table),
) -> Result<(), CliError> {
    let p = &res.params;
    let g = p.grid();
    write_snapshots(st, res.config.output.format, times, snapshots)?;
    st.write(
        "mean_activity.csv",
        series_csv(g, times, &[("rho_bar", &means)]),
    )?;
    let bound: Table = times
        .iter()
        .zip(&traces)
        .map(|(t, tr)| {
            tr.iter()
                .map(|row| vec![boundary_bound(*t, p.sigma, p.tau_c, p.measure()); row.len()])
                .collect()
        })
        .collect();
    st.write(
        "boundary.csv",
        series_csv(g, times, &[("rho0", &traces), ("bound", &bound)]),
    )?;
    let mut mass = String::from("t,max_mass_error,min_rho\n");
    for (t, s) in times.iter().zip(snapshots) {
        let err = s.iter().map(|f| f.mass_error()).fold(0.0, f64::max);
        let min = s
            .iter()
            .map(|f| f.min_value())
            .fold(f64::INFINITY, f64::min);
        let _ = writeln!(mass, "{},{},{}", num(*t), num(err), num(min));
    }
    st.write("mass.csv", mass)?;
    Ok(())
}

fn weak_residuals(solver: &DirectSolver, run: &DirectRun, pops: usize) -> String {
    let mut out = String::from("test_function,beta,residual\n");
    for (name, h) in [
        ("one", TestFunction::One),
        ("identity", TestFunction::Identity),
        ("square", TestFunction::Square),
    ] {
        for b in 0..pops {
            let _ = writeln!(
                out,
                "{name},{b},{}",
                num(weak_moment_residual(solver, run, h, b))
            );
        }
    }
    out
}

fn direct_summary(run: &DirectRun) -> String {
    pretty(
        &json!({ "steps": run.steps, "max_mass_error": run.max_mass_error, "min_value": run.min_value }),
    )
}

fn simulate(res: &Resolved, text: &str, st: &mut Staging) -> Result<usize, CliError> {
    let solver = DirectSolver::for_params(&res.params, res.solver_config(text)?)?;
    let run = solver.run(vec![res.initial.clone()])?;
    write_trajectory(res, st, &run.times, &run.snapshots, direct_tables(&run))?;
    st.write("weak_residuals.csv", weak_residuals(&solver, &run, 1))?;
    st.write("summary.json", direct_summary(&run))?;
    Ok(1)
}

fn window_tables(res: &Resolved, run: &StefanRun, st: &mut Staging) -> Result<(), CliError> {
    let g = res.params.grid();
    let nx = g.cells();
    let multi = run.populations > 1;
    let mut summary =
        String::from("window,tau_start,dtau,nodes,iterations,final_residual,damping,halvings\n");
    for (k, w) in run.windows.iter().enumerate() {
        let _ = writeln!(
            summary,
            "{k},{},{},{},{},{},{},{}",
            num(w.start),
            num(w.dtau),
            w.nodes,
            w.residuals.len(),
            num(w.residuals.last().copied().unwrap_or(0.0)),
            num(w.damping),
            w.halvings
        );
        let mut table = String::new();
        if multi {
            table.push_str("beta,");
        }
        let _ = writeln!(table, "{},node,tau,v,gamma,ubar,psi", index_header(g));
        for (row, v) in w.v.iter().enumerate() {
            let (b, x) = (row / nx, row % nx);
            for m in 0..w.nodes {
                if multi {
                    let _ = write!(table, "{b},");
                }
                let _ = writeln!(
                    table,
                    "{},{m},{},{},{},{},{}",
                    index_values(g, x),
                    num(w.start + m as f64 * w.dtau),
                    num(v[m]),
                    num(w.gamma[row][m]),
                    num(w.ubar[row][m]),
                    num(w.psi[row][m])
                );
            }
        }
        st.write(&format!("windows/window_{k:03}.csv"), table)?;
    }
    st.write("windows/summary.csv", summary)?;
    Ok(())
}

fn stefan(res: &Resolved, text: &str, st: &mut Staging) -> Result<usize, CliError> {
    let run = StefanSolver::for_params(&res.params, res.stefan_config(text)?)?
        .run(vec![res.initial.clone()])?;
    write_trajectory(res, st, &run.times, &run.snapshots, stefan_tables(&run))?;
    window_tables(res, &run, st)?;
    Ok(1)
}

fn equilibrium(res: &Resolved, st: &mut Staging) -> Result<usize, CliError> {
    let eq = &res.equilibrium;
    let mut table = String::from("quantity,value\n");
    let mut row = |k: &str, v: f64| {
        let _ = writeln!(table, "{k},{}", num(v));
    };
    row("phi0", eq.phi0);
    row("rho_bar_inf", eq.mean);
    row("m_inf", eq.m_inf);
    row("z_rho", eq.z_rho);
    row("phi0_prime", eq.phi0_prime);
    row("sigma", eq.sigma);
    row("measure", eq.measure);
    if let Some(th) = high_noise_threshold(&res.params) {
        row("high_noise_threshold", th);
    }
    for r in &eq.other_roots {
        row("other_root", *r);
    }
    st.write("equilibrium.csv", table)?;
    let profile = eq.profile(&res.params.grid().clone(), &res.activity);
    let mut prof = String::from("s,rho\n");
    for (s, v) in res.activity.centers().iter().zip(profile.row(0)) {
        let _ = writeln!(prof, "{},{}", num(*s), num(*v));
    }
    st.write("profile.csv", prof)?;
    Ok(1)
}

fn stability_check(res: &Resolved, text: &str, st: &mut Staging) -> Result<usize, CliError> {
    let c = &res.config.stability;
    let p = &res.params;
    let re0 = summed_entropy(
        &[res.initial.clone()],
        &res.equilibrium.profile(p.grid(), &res.activity),
    )?;
    let mut report = stability_report(
        p,
        &res.equilibrium,
        &res.activity,
        c.poincare,
        c.alpha,
        re0,
        c.epsilon,
        c.k_max,
    );
    let mut extra = serde_json::Map::new();
    if res.config.gridcell.is_some() {
        let set = res.population_set(text)?;
        let gamma = report.parameters.gamma;
        let sc = shift_condition(&res.equilibrium, p, &set.shifts, gamma, c.alpha, c.xi);
        report.conditions.push(ConditionRecord {
            name: "shift".into(),
            lhs: sc.lhs,
            rhs: sc.rhs,
            holds: sc.holds,
        });
        report.conditions.push(ConditionRecord {
            name: "shift-asymmetric".into(),
            lhs: sc.asymmetric_lhs,
            rhs: sc.asymmetric_rhs,
            holds: sc.asymmetric_holds,
        });
        extra.insert("shift_condition".into(), serde_json::to_value(&sc).unwrap());
        if let Ok(n4) =
            check_nonlinear_condition4(p, &res.equilibrium, &set.shifts, c.alpha, c.k_max)
        {
            extra.insert(
                "nonlinear_four_population".into(),
                serde_json::to_value(&n4).unwrap(),
            );
        }
    }
    let mut value = serde_json::to_value(&report).unwrap();
    value.as_object_mut().unwrap().extend(extra);
    st.write("report.json", pretty(&value))?;
    let mut conds = String::from("name,lhs,rhs,holds\n");
    for r in &report.conditions {
        let _ = writeln!(
            conds,
            "{},{},{},{}",
            r.name,
            num(r.lhs),
            num(r.rhs),
            r.holds
        );
    }
    st.write("conditions.csv", conds)?;
    let g = p.grid();
    let mut margins = format!("{},w_hat,margin\n", if g.d == 1 { "k" } else { "k0,k1" });
    for m in &report.fourier.margins {
        let k: Vec<String> = m.k.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            margins,
            "{},{},{}",
            k.join(","),
            num(m.w_hat),
            num(m.margin)
        );
    }
    st.write("fourier_margins.csv", margins)?;
    Ok(1)
}

fn entropy_csv(times: &[f64], re: &[f64], q: &[f64]) -> String {
    let mut out = String::from("t,relative_entropy,q\n");
    for ((t, r), q) in times.iter().zip(re).zip(q) {
        let _ = writeln!(out, "{},{},{}", num(*t), num(*r), num(*q));
    }
    out
}

fn gridcell(res: &Resolved, text: &str, st: &mut Staging) -> Result<usize, CliError> {
    let set = res.population_set(text)?;
    let p = &res.params;
    let c = &res.config.stability;
    let gamma = poincare_constant(&res.equilibrium, &res.activity, c.poincare);
    let sc = shift_condition(&res.equilibrium, p, &set.shifts, gamma, c.alpha, c.xi);
    let n4 = check_nonlinear_condition4(p, &res.equilibrium, &set.shifts, c.alpha, c.k_max).ok();
    st.write(
        "shift_condition.json",
        pretty(&json!({ "shifts": set.shifts, "shift_condition": sc, "nonlinear": n4 })),
    )?;
    let rho_inf = res.equilibrium.profile(p.grid(), &res.activity);
    let (times, snapshots) = match res.config.gridcell.as_ref().unwrap().backend {
        Backend::Direct => {
            let cfg = res.solver_config(text)?;
            let solver = DirectSolver::new(set.coupling(p), p.tau_c, p.sigma, cfg.clone())?;
            let run = run4(&set, p, cfg)?;
            write_trajectory(res, st, &run.times, &run.snapshots, direct_tables(&run))?;
            st.write(
                "weak_residuals.csv",
                weak_residuals(&solver, &run, set.fields.len()),
            )?;
            st.write("summary.json", direct_summary(&run))?;
            (run.times, run.snapshots)
        }
        Backend::Stefan => {
            let run = stefan4(&set, p, res.stefan_config(text)?)?;
            write_trajectory(res, st, &run.times, &run.snapshots, stefan_tables(&run))?;
            window_tables(res, &run, st)?;
            (run.times, run.snapshots)
        }
    };
    let re: Vec<f64> = snapshots
        .iter()
        .map(|s| summed_entropy(s, &rho_inf))
        .collect::<Result<_, _>>()?;
    let mut out = String::from("t,summed_relative_entropy\n");
    for (t, r) in times.iter().zip(&re) {
        let _ = writeln!(out, "{},{}", num(*t), num(*r));
    }
    st.write("entropy.csv", out)?;
    Ok(set.fields.len())
}

fn crosscheck(res: &Resolved, text: &str, st: &mut Staging) -> Result<usize, CliError> {
    let sc = res.stefan_config(text)?;
    let mut dc: SolverConfig = res.solver_config(text)?;
    dc.t_end = sc.t_end;
    dc.snapshot_stride = (sc.snapshot_dt / dc.dt).round() as usize;
    let direct = DirectSolver::for_params(&res.params, dc)?.run(vec![res.initial.clone()])?;
    let stefan = StefanSolver::for_params(&res.params, sc)?.run(vec![res.initial.clone()])?;
    let mut table = String::from("t,l1,sup,mean_sup,boundary_sup\n");
    let (mut worst_l1, mut worst_sup): (f64, f64) = (0.0, 0.0);
    for (k, t) in stefan.times.iter().enumerate() {
        let Some(j) = direct
            .times
            .iter()
            .position(|u| (u - t).abs() <= 1e-9 * (1.0 + t))
        else {
            continue;
        };
        let a = &direct.snapshots[j][0];
        let b = &stefan.snapshots[k][0];
        let l1 = a.l1_distance(b)?;
        let sup = a.sup_distance(b)?;
        let ma = a.mean_activity();
        let mb = &stefan.mean_at(*t)[0];
        let mean_sup = ma
            .iter()
            .zip(mb)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let boundary_sup = if *t > 0.0 {
            let bb = &stefan.boundary_at(*t)[0];
            a.boundary_trace()
                .iter()
                .zip(bb)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        } else {
            0.0
        };
        worst_l1 = worst_l1.max(l1);
        worst_sup = worst_sup.max(sup);
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            num(*t),
            num(l1),
            num(sup),
            num(mean_sup),
            num(boundary_sup)
        );
    }
    st.write("crosscheck.csv", table)?;
    st.write(
        "summary.json",
        pretty(&json!({ "max_l1": worst_l1, "max_sup": worst_sup })),
    )?;
    Ok(1)
}

fn read_snapshot(
    run_dir: &Path,
    k: usize,
    res: &Resolved,
    pops: usize,
) -> Result<Vec<DensityField>, CliError> {
    let bin = run_dir.join(snapshot_name(k, "bin"));
    if bin.exists() {
        return Ok(decode_binary(&fs::read(bin)?)?);
    }
    let path = run_dir.join(snapshot_name(k, "csv"));
    let text = fs::read_to_string(&path)?;
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap_or("").parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| {
            CliError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            ))
        })?;
    let per = res.initial.values.len();
    if values.len() != per * pops {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "{} has {} values, expected {}",
                path.display(),
                values.len(),
                per * pops
            ),
        )));
    }
    Ok(values
        .chunks(per)
        .map(|c| DensityField {
            values: c.to_vec(),
            ..res.initial.clone()
        })
        .collect())
}

/// Relative entropy and `Q` along a finished run directory, written next to it (or into `out`).
pub fn entropy_track(run_dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (text, res) = load(&run_dir.join("config.json"), Overrides::default())?;
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json"))?).map_err(|e| {
            CliError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                e.to_string(),
            ))
        })?;
    let pops = manifest["populations"].as_u64().unwrap_or(1) as usize;
    let index = fs::read_to_string(run_dir.join("snapshots/index.csv"))?;
    let mut run = DirectRun::default();
    for line in index.lines().skip(1) {
        let mut it = line.split(',');
        let k: usize = it.next().and_then(|v| v.parse().ok()).unwrap_or(0);
        let t: f64 = it.next().and_then(|v| v.parse().ok()).unwrap_or(0.0);
        run.times.push(t);
        run.snapshots.push(read_snapshot(run_dir, k, &res, pops)?);
    }
    let p = &res.params;
    let coupling = if pops > 1 {
        res.population_set(&text)?.coupling(p)
    } else {
        Coupling::single(p)
    };
    // only the drift is used, so any valid time step will do
    let solver = DirectSolver::new(coupling, p.tau_c, p.sigma, SolverConfig::new(1.0, 1.0))?;
    let tr = entropy_trace(&solver, &run, &res.equilibrium)?;
    let fit = measure_decay(&tr.times, &tr.relative_entropy).ok();
    let c = &res.config.stability;
    let re0 = tr.relative_entropy.first().copied().unwrap_or(0.0);
    let report = stability_report(
        p,
        &res.equilibrium,
        &res.activity,
        c.poincare,
        c.alpha,
        re0,
        c.epsilon,
        c.k_max,
    );
    let dir = out.unwrap_or(run_dir);
    fs::create_dir_all(dir)?;
    write_into(
        dir,
        "entropy_track.csv",
        entropy_csv(&tr.times, &tr.relative_entropy, &tr.q),
    )?;
    let summary = json!({
        "excluded_mass": tr.excluded_mass,
        "fit": fit.map(|f| json!({ "rate": f.rate, "r_squared": f.r_squared, "samples": f.samples })),
        "predicted": report.decay,
    });
    write_into(dir, "entropy_track.json", pretty(&summary))?;
    Ok(())
}
