use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lienard_core::census::{self, Lemma1};
use lienard_core::conserved::{self, DiracOptions, Variant};
use lienard_core::section::{self, linspace};
use lienard_core::separatrix::{self, Branch, FindD0Options, ShootConfig};
use lienard_core::{Error, OdeConfig, Poly, SystemParams};
use lienard_lab::format::{num, parse_list};
use lienard_lab::portrait::{portrait, Curve, CurveKind, Window};
use lienard_lab::table::{self, Table};

/// Liénard systems x' = y - F(x), y' = -eps x + e x^2 with polynomial F.
///
/// Coefficients are given in ascending order without the constant term:
/// `--coeffs d,c,b,a` is F = d x + c x^2 + b x^3 + a x^4, so "0,0,1,1" is
/// x^4 + x^3. `--abc a,b,c[,d]` is the same quartic written from the top.
#[derive(Parser, Debug)]
#[command(name = "lienard-lab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// F in ascending order: c1,c2,...,cN (e.g. d,c,b,a for a quartic).
    #[arg(long, global = true, value_parser = list, allow_hyphen_values = true)]
    coeffs: Option<List>,
    /// Quartic family in descending order a,b,c[,d].
    #[arg(long, global = true, value_parser = list, allow_hyphen_values = true, conflicts_with = "coeffs")]
    abc: Option<List>,
    /// Coefficient of -x in y'.
    #[arg(long, global = true, default_value_t = 1.0)]
    eps: f64,
    /// Coefficient of x^2 in y'.
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    e: f64,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Time limit per orbit.
    #[arg(long, global = true)]
    tmax: Option<f64>,
    #[arg(long, global = true)]
    blowup_radius: Option<f64>,
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Phase portrait (SVG): graph of F, orbits through the section, separatrices.
    Portrait(PortraitArgs),
    /// Poincaré return map P on the section {x = 0, y < 0}, with return time and divergence integral.
    ReturnMap(ReturnMapArgs),
    /// Separatrices of the saddle at infinity: crossings U (unstable) and S (stable) with the section.
    Separatrix(SeparatrixArgs),
    /// Homoclinic loop parameter d0 of F = a x^4 + b x^3 + c x^2 + d x (U(d0) = S(d0)).
    Homoclinic(HomoclinicArgs),
    /// Limit-cycle census: fixed points of the return map with stability.
    Census(CensusArgs),
    /// Parity of the cycle count on either side of the homoclinic parameter d0.
    Parity(ParityArgs),
    /// Small Hopf cycle born from the origin for b > 0 at small negative d.
    Hopf(HopfArgs),
    /// Small-eps limits of the separatrix crossings versus the half-line minima of F.
    EpsLimit(EpsLimitArgs),
    /// No-closed-orbit certificate: the odd part of F has 0 as its only real root.
    Lemma1,
    /// First integrals of the 4D Hamiltonian embedding H = z(y - F(x)) - wx.
    Conserved(ConservedArgs),
    /// Outer spread of the orbit through (0, y~) for large y~: crossings with the graph of F.
    Spread(SpreadArgs),
}

#[derive(Args, Debug)]
struct PortraitArgs {
    /// x_min,x_max,y_min,y_max
    #[arg(long, value_parser = list, allow_hyphen_values = true, default_value = "-3,3,-3,3")]
    window: List,
    /// Sample points for the graph of F.
    #[arg(long, default_value_t = 400)]
    grid: usize,
    /// Section starts y0 < 0 of orbits to draw (one revolution each).
    #[arg(long, value_parser = list, allow_hyphen_values = true)]
    orbits: Option<List>,
    /// Also draw both separatrices (even degree, positive leading coefficient).
    #[arg(long)]
    separatrices: bool,
    /// Starting cutoff for separatrix shooting.
    #[arg(long)]
    xfar: Option<f64>,
    /// SVG output path (default: --out or stdout).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReturnMapArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
    ymin: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.05)]
    ymax: f64,
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// Explicit starts instead of the grid.
    #[arg(long, value_parser = list, allow_hyphen_values = true)]
    y0: Option<List>,
}

#[derive(Args, Debug)]
struct SeparatrixArgs {
    /// Agreement required between successive cutoffs.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Starting cutoff (default: chosen from F).
    #[arg(long)]
    xfar: Option<f64>,
    /// Scan d over [dmin, dmax] (quartic family) instead of a single row.
    #[arg(long, allow_hyphen_values = true, requires = "dmax")]
    dmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "dmin")]
    dmax: Option<f64>,
    /// Grid points of the d scan.
    #[arg(long, default_value_t = 11)]
    steps: usize,
}

#[derive(Args, Debug)]
struct HomoclinicArgs {
    /// Final bisection bracket width.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Bisect even when b = 0 instead of using the symmetry certificate.
    #[arg(long)]
    no_certificate: bool,
    /// Upper end of the initial bracket (b >= 0).
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[arg(long)]
    xfar: Option<f64>,
}

#[derive(Args, Debug)]
struct CensusArgs {
    /// Default: just inside the stable separatrix crossing.
    #[arg(long, allow_hyphen_values = true)]
    ymin: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -1e-3)]
    ymax: f64,
    #[arg(long, default_value_t = 128)]
    samples: usize,
}

#[derive(Args, Debug)]
struct ParityArgs {
    #[arg(long, default_value_t = 128)]
    samples: usize,
    /// Bisection width for d0.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
struct HopfArgs {
    /// Linear coefficient to probe at.
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.01)]
    d: f64,
}

#[derive(Args, Debug)]
struct EpsLimitArgs {
    /// Strictly decreasing list of eps.
    #[arg(long, value_parser = list, default_value = "0.5,0.1,0.02")]
    eps_list: List,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    xfar: Option<f64>,
}

#[derive(Args, Debug)]
struct ConservedArgs {
    /// x,y,z,w
    #[arg(long, value_parser = list, allow_hyphen_values = true, default_value = "0.3,-0.2,1,0")]
    start: List,
    #[arg(long, default_value_t = 50.0)]
    tspan: f64,
    /// Output interval of the trajectory table.
    #[arg(long, default_value_t = 0.1)]
    stride: f64,
    /// Use z' = w - F'(x) z (planar variational equation) instead of the Hamiltonian sign.
    #[arg(long)]
    variational: bool,
}

#[derive(Args, Debug)]
struct SpreadArgs {
    #[arg(long, value_parser = list, default_value = "100,1000,10000")]
    ytilde: List,
}

/// Comma-separated numbers as one flag value.
#[derive(Debug, Clone)]
struct List(Vec<f64>);

fn list(s: &str) -> Result<List, String> {
    parse_list(s).map(List).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Core(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

impl Common {
    fn poly(&self) -> Result<Poly, Failure> {
        match (&self.coeffs, &self.abc) {
            (Some(c), _) => Ok(Poly::new(c.0.clone())?),
            (None, Some(abc)) => {
                let (a, b, c, d) = quartic_from_abc(&abc.0)?;
                Ok(Poly::quartic(a, b, c, d))
            }
            (None, None) => usage("F is required: pass --coeffs d,c,b,a or --abc a,b,c,d"),
        }
    }

    /// (a, b, c, d) of a quartic F.
    fn quartic(&self) -> Result<(f64, f64, f64, f64), Failure> {
        match (&self.coeffs, &self.abc) {
            (Some(List(c)), _) => {
                if c.len() > 4 {
                    return usage(format!(
                        "expected at most 4 coefficients d,c,b,a, got {}",
                        c.len()
                    ));
                }
                let g = |i: usize| c.get(i).copied().unwrap_or(0.0);
                Ok((g(3), g(2), g(1), g(0)))
            }
            (None, Some(abc)) => quartic_from_abc(&abc.0),
            (None, None) => usage("the quartic family needs --coeffs d,c,b,a or --abc a,b,c,d"),
        }
    }

    fn params(&self) -> Result<SystemParams, Failure> {
        let p = SystemParams::new(self.poly()?).with_eps(self.eps).with_e(self.e);
        p.validate()?;
        Ok(p)
    }

    fn ode(&self, base: OdeConfig) -> Result<OdeConfig, Failure> {
        let mut c = base;
        if let Some(v) = self.rtol {
            c = c.with_rtol(v);
        }
        if let Some(v) = self.atol {
            c = c.with_atol(v);
        }
        if let Some(v) = self.tmax {
            c = c.with_t_max(v);
        }
        if let Some(v) = self.blowup_radius {
            c = c.with_blowup_radius(v);
        }
        if let Some(v) = self.max_steps {
            c.max_steps = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn shoot(&self, tol: f64, xfar: Option<f64>) -> Result<ShootConfig<f64>, Failure> {
        if !(tol > 0.0) || xfar.is_some_and(|x| !(x > 0.0)) {
            return usage("--tol and --xfar must be positive");
        }
        let base = ShootConfig::<f64>::default();
        Ok(ShootConfig {
            tol,
            x_far: xfar,
            ode: self.ode(base.ode)?,
            ..base
        })
    }

    fn sink(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit(&self, t: &Table) -> Outcome {
        t.write_to(self.sink()?)?;
        Ok(())
    }
}

fn quartic_from_abc(abc: &[f64]) -> Result<(f64, f64, f64, f64), Failure> {
    match abc {
        [a, b, c] => Ok((*a, *b, *c, 0.0)),
        [a, b, c, d] => Ok((*a, *b, *c, *d)),
        _ => usage(format!("--abc takes 3 or 4 entries, got {}", abc.len())),
    }
}

fn note_ignored_d(d: f64, what: &str) {
    if d != 0.0 {
        eprintln!("note: {what} sweeps d itself; the given d = {d} is ignored");
    }
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Portrait(a) => cmd_portrait(c, a),
        Cmd::ReturnMap(a) => cmd_return_map(c, a),
        Cmd::Separatrix(a) => cmd_separatrix(c, a),
        Cmd::Homoclinic(a) => cmd_homoclinic(c, a),
        Cmd::Census(a) => cmd_census(c, a),
        Cmd::Parity(a) => cmd_parity(c, a),
        Cmd::Hopf(a) => cmd_hopf(c, a),
        Cmd::EpsLimit(a) => cmd_eps_limit(c, a),
        Cmd::Lemma1 => {
            let cert = census::lemma1_certificate(&c.poly()?);
            writeln!(c.sink()?, "{cert}")?;
            if cert == Lemma1::NotApplicable {
                eprintln!("note: the odd part of F has a nonzero real root; no conclusion");
            }
            Ok(())
        }
        Cmd::Conserved(a) => cmd_conserved(c, a),
        Cmd::Spread(a) => cmd_spread(c, a),
    }
}

fn cmd_portrait(c: &Common, a: &PortraitArgs) -> Outcome {
    let [x0, x1, y0, y1] = a.window.0[..] else {
        return usage("--window takes x_min,x_max,y_min,y_max");
    };
    let win = Window::new(x0, x1, y0, y1)?;
    let params = c.params()?;
    let cfg = c.ode(section::section_config())?;
    let mut curves = Vec::new();
    for &y in a.orbits.as_ref().map_or(&[][..], |l| &l.0[..]) {
        if !(y < 0.0) {
            return usage(format!("orbit starts must be negative, got {y}"));
        }
        let pts = section::orbit_points(&params, y, &cfg)?;
        curves.push(Curve {
            kind: CurveKind::Orbit,
            points: pts.iter().map(|s| (s.x, s.y)).collect(),
        });
    }
    if a.separatrices {
        let shoot = c.shoot(1e-8, a.xfar)?;
        for branch in [Branch::Stable, Branch::Unstable] {
            let r = separatrix::separatrix(&params, branch, &shoot)?;
            let pts = separatrix::separatrix_trajectory(&params, branch, r.x_far, &shoot.ode)?;
            curves.push(Curve {
                kind: CurveKind::Separatrix,
                points: pts.iter().map(|s| (s.x, s.y)).collect(),
            });
        }
    }
    let svg = portrait(&params.f, win, a.grid, &curves)?;
    let mut sink: Box<dyn Write> = match (&a.svg, &c.out) {
        (Some(p), _) | (None, Some(p)) => Box::new(File::create(p)?),
        (None, None) => Box::new(io::stdout().lock()),
    };
    sink.write_all(svg.as_bytes())?;
    Ok(())
}

fn cmd_return_map(c: &Common, a: &ReturnMapArgs) -> Outcome {
    let params = c.params()?;
    let cfg = c.ode(section::section_config())?;
    let ys = match &a.y0 {
        Some(ys) => ys.0.clone(),
        None => {
            if !(a.ymin < a.ymax && a.ymax < 0.0) || a.samples < 2 {
                return usage("need ymin < ymax < 0 and at least 2 samples");
            }
            linspace(a.ymin, a.ymax, a.samples)
        }
    };
    let mut t = Table::new(table::RETURN_MAP);
    for r in section::scan(&params, &ys, &cfg) {
        let s = r?;
        t.push(vec![
            num(s.y0),
            num(s.p),
            num(s.t_return),
            num(s.div_integral),
            s.status.to_string(),
        ]);
    }
    c.emit(&t)
}

fn cmd_separatrix(c: &Common, a: &SeparatrixArgs) -> Outcome {
    let shoot = c.shoot(a.tol, a.xfar)?;
    let mut t = Table::new(table::SEPARATRIX);
    match (a.dmin, a.dmax) {
        (Some(lo), Some(hi)) => {
            if !(lo < hi) || a.steps < 2 {
                return usage("need dmin < dmax and at least 2 steps");
            }
            let (qa, qb, qc, qd) = c.quartic()?;
            note_ignored_d(qd, "the d scan");
            let scan = separatrix::monotonic_scan(qa, qb, qc, &linspace(lo, hi, a.steps), &shoot)?;
            for row in &scan.rows {
                let (u, s) = (row.u.clone()?, row.s.clone()?);
                t.push_nums(&[row.d, u.value, s.value, u.err_est, s.err_est]);
            }
            for i in &scan.violations {
                eprintln!(
                    "warning: monotonicity violated between d = {} and d = {}",
                    scan.rows[*i].d,
                    scan.rows[*i + 1].d
                );
            }
        }
        _ => {
            let params = c.params()?;
            let (u, s) = separatrix::both_intersections(&params, &shoot)?;
            if s.captured || u.captured {
                eprintln!("note: a separatrix ends at the origin before reaching the axis; reported as 0");
            }
            t.push_nums(&[params.f.coeff(1), u.value, s.value, u.err_est, s.err_est]);
        }
    }
    c.emit(&t)
}

fn cmd_homoclinic(c: &Common, a: &HomoclinicArgs) -> Outcome {
    let (qa, qb, qc, qd) = c.quartic()?;
    note_ignored_d(qd, "homoclinic");
    let opts = FindD0Options {
        tol: a.tol,
        use_symmetry_certificate: !a.no_certificate,
        upper: a.upper,
        shoot: c.shoot(1e-8, a.xfar)?,
        ..FindD0Options::default()
    };
    if !(opts.tol > 0.0) {
        return usage("--tol must be positive");
    }
    let r = separatrix::find_d0(qa, qb, qc, &opts)?;
    if r.certificate.is_some() {
        eprintln!("note: b = 0 makes F even at d = 0; d0 = 0 by reflection symmetry, no bisection run");
    }
    let mut t = Table::new(table::HOMOCLINIC);
    t.push(vec![
        num(qa),
        num(qb),
        num(qc),
        num(r.d0),
        num(r.p0),
        r.loop_stable.to_string(),
        r.iterations.to_string(),
    ]);
    c.emit(&t)
}

fn census_table(cycles: &[lienard_core::CycleRecord]) -> Table {
    let mut t = Table::new(table::CENSUS);
    for cy in cycles {
        t.push(vec![
            num(cy.y_star),
            cy.stability.to_string(),
            num(cy.p_prime),
            num(cy.period),
            num(cy.bracket.0),
            num(cy.bracket.1),
        ]);
    }
    t
}

fn cmd_census(c: &Common, a: &CensusArgs) -> Outcome {
    let params = c.params()?;
    let cfg = c.ode(section::section_config())?;
    let ymin = match a.ymin {
        Some(v) => v,
        None => {
            let s = separatrix::stable_intersection(&params, &c.shoot(1e-8, None)?)
                .map_err(|e| {
                    Failure::Usage(format!(
                        "no default range ({e}); pass --ymin explicitly"
                    ))
                })?;
            if !(s.value < a.ymax) {
                return usage("stable separatrix crossing is above --ymax; pass --ymin");
            }
            s.value * 0.999
        }
    };
    let r = census::census(&params, ymin, a.ymax, a.samples, &cfg)?;
    if r.center_detected {
        eprintln!("note: displacement vanishes on every returned sample: center, not isolated cycles");
    }
    if r.no_return_fraction > 0.0 {
        eprintln!(
            "note: {:.1}% of samples did not return and were excluded",
            100.0 * r.no_return_fraction
        );
    }
    if r.cycles.iter().any(|cy| cy.stability == census::Stability::SemiStable) {
        eprintln!("note: SemiStable is a heuristic label from a tangency probe");
    }
    eprintln!("cycles: {} ({})", r.count(), r.parity);
    c.emit(&census_table(&r.cycles))
}

fn cmd_parity(c: &Common, a: &ParityArgs) -> Outcome {
    let (qa, qb, qc, qd) = c.quartic()?;
    let opts = FindD0Options {
        tol: a.tol,
        shoot: c.shoot(1e-8, None)?,
        ..FindD0Options::default()
    };
    let cfg = c.ode(section::section_config())?;
    let r = census::parity_report(qa, qb, qc, qd, a.samples, &opts, &cfg)?;
    let mut t = Table::new(table::PARITY);
    t.push(vec![
        num(r.d),
        r.count.to_string(),
        r.parity.to_string(),
        num(r.d0),
        r.consistent.to_string(),
    ]);
    c.emit(&t)
}

fn cmd_hopf(c: &Common, a: &HopfArgs) -> Outcome {
    let (qa, qb, qc, qd) = c.quartic()?;
    note_ignored_d(qd, "hopf (use --d)");
    let cfg = c.ode(section::section_config())?;
    let r = census::hopf_probe_at(qa, qb, qc, a.d, &cfg)?;
    if r.is_none() {
        eprintln!("no cycle in (-0.5, -1e-4) at d = {}", a.d);
    }
    c.emit(&census_table(r.as_slice()))
}

fn cmd_eps_limit(c: &Common, a: &EpsLimitArgs) -> Outcome {
    let f = c.poly()?;
    let rows = census::epsilon_limit_check(&f, &a.eps_list.0, &c.shoot(a.tol, a.xfar)?)?;
    let mut t = Table::new(table::EPS_LIMIT);
    for r in rows {
        let (u, s) = (r.u?, r.s?);
        t.push_nums(&[r.eps, u.value, s.value, r.m_plus, r.m_minus]);
    }
    c.emit(&t)
}

fn cmd_conserved(c: &Common, a: &ConservedArgs) -> Outcome {
    let f = c.poly()?;
    let [x, y, z, w] = a.start.0[..] else {
        return usage("--start takes x,y,z,w");
    };
    let mut opts = DiracOptions::default().with_stride(a.stride);
    if let Some(r) = c.rtol {
        opts = opts.with_rtol(r);
    }
    if let Some(v) = c.atol {
        opts.atol = v;
    }
    if let Some(v) = c.max_steps {
        opts.max_steps = v;
    }
    if a.variational {
        opts = opts.with_variant(Variant::Variational);
    }
    let run = conserved::dirac_flow(&f, conserved::State4::new(x, y, z, w), a.tspan, &opts)?;
    let mut t = Table::new(table::DIRAC);
    for r in &run.rows {
        let s = r.state;
        t.push_nums(&[s.t, s.x, s.y, s.z, s.w, r.h, r.extra]);
    }
    for d in std::iter::once(&run.h).chain(run.extra.as_ref()) {
        eprintln!(
            "{}: initial {:e}, max drift {:e}, relative {:e} over t = {}",
            d.quantity, d.initial, d.max_abs_drift, d.relative_drift, d.t_span
        );
    }
    c.emit(&t)
}

fn cmd_spread(c: &Common, a: &SpreadArgs) -> Outcome {
    let params = c.params()?;
    let cfg = c.ode(section::section_config())?;
    let rows = section::spread_bound_probe(&params, &a.ytilde.0, &cfg)?;
    let mut t = Table::new(table::SPREAD);
    for r in rows {
        t.push_nums(&[r.y_tilde, r.y1, r.y2, r.ratio_forward, r.ratio_backward]);
    }
    c.emit(&t)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIENARD_LAB_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() || matches!(e, Error::SizeCap { .. }) {
                3
            } else {
                2
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
