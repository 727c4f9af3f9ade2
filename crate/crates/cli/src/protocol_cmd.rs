use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use urllc_core::io::{fmt_db, fmt_prob, CsvTable};
use urllc_core::oracle::{estimate_outage, mc_min_snr, sweep, LinkSpec, Scenario, SweepOptions, SweepRow};
use urllc_core::protocol::{
    link_outage, max_tolerable_plink, min_snr, robust_cycle_outage, spectral_efficiency, Dynamics, MinSnr,
    MinSnrRecord, ProtocolConfig, RefreshBoundary, Scheme, SearchGrid, UncertaintyBudget,
};

use crate::output::Outputs;
use crate::{usage, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    #[value(alias = "occupy-cow")]
    Occupy,
    #[value(alias = "xor-cow")]
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsArg {
    QuasiStatic,
    PhaseRefresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshArg {
    EveryPhase,
    DownlinkUplink,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct LinkArgs {
    /// Message size, bits.
    #[arg(long, default_value_t = 160.0)]
    pub m: f64,
    /// Cycle time, milliseconds.
    #[arg(long, default_value_t = 2.0)]
    pub t_ms: f64,
    /// Bandwidth, Hz.
    #[arg(long, default_value_t = 20e6)]
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct ProtocolArgs {
    #[arg(long, value_enum, default_value_t = SchemeArg::Occupy)]
    pub scheme: SchemeArg,
    /// Number of nodes besides the controller.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Initial transmissions per message.
    #[arg(long, default_value_t = 1)]
    pub k1: usize,
    /// Relay slots per message.
    #[arg(long, default_value_t = 1)]
    pub k2: usize,
    /// Maximum simultaneous relays.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, value_enum, default_value_t = DynamicsArg::QuasiStatic)]
    pub dynamics: DynamicsArg,
    /// Where phase-refresh dynamics redraw channels.
    #[arg(long, value_enum, default_value_t = RefreshArg::EveryPhase)]
    pub refresh: RefreshArg,
    /// Probability that a link fade is fresh rather than copied.
    #[arg(long)]
    pub q: Option<f64>,
    /// Additive slack on the link failure probability.
    #[arg(long, default_value_t = 0.0)]
    pub poff: f64,
    /// Per-slot, per-transmitter corruption probability.
    #[arg(long, default_value_t = 0.0)]
    pub pc: f64,
    /// Per-slot, per-receiver corruption probability.
    #[arg(long, default_value_t = 0.0)]
    pub pg: f64,
}

impl ProtocolArgs {
    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig {
            scheme: match self.scheme {
                SchemeArg::Occupy => Scheme::OccupyCow,
                SchemeArg::Xor => Scheme::XorCow,
            },
            n: self.n,
            message_bits: self.link.m,
            cycle_time: self.link.t_ms * 1e-3,
            bandwidth: self.link.bandwidth,
            k1: self.k1,
            k2: self.k2,
            cap: self.cap,
            dynamics: match self.dynamics {
                DynamicsArg::QuasiStatic => Dynamics::QuasiStatic,
                DynamicsArg::PhaseRefresh => Dynamics::PhaseRefresh,
            },
            refresh: match self.refresh {
                RefreshArg::EveryPhase => RefreshBoundary::EveryPhase,
                RefreshArg::DownlinkUplink => RefreshBoundary::DownlinkUplink,
            },
            q: self.q,
        }
    }

    pub fn budget(&self) -> UncertaintyBudget {
        UncertaintyBudget::new(self.poff, self.pc, self.pg)
    }
}

fn describe(cfg: &ProtocolConfig, budget: &UncertaintyBudget) -> String {
    format!(
        "scheme {}, n = {}, m = {} bits, T = {} ms, W = {} Hz, k1 = {}, k2 = {}, cap = {}, dynamics = {:?}, q = {}, \
         p_off = {}, p_c = {}, p_g = {}",
        cfg.scheme.label(),
        cfg.n,
        cfg.message_bits,
        cfg.cycle_time * 1e3,
        cfg.bandwidth,
        cfg.k1,
        cfg.k2,
        cfg.cap.map_or("none".into(), |c| c.to_string()),
        cfg.dynamics,
        cfg.q.map_or("none".into(), |q| q.to_string()),
        budget.p_off,
        budget.p_c,
        budget.p_g
    )
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolCmd {
    /// Cycle failure probability against nominal SNR.
    Outage {
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// dB, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-5,0,5,10,15,20,25,30")]
        snr_db: Vec<f64>,
        /// Also simulate this many cycles per point (required when no
        /// closed form exists).
        #[arg(long)]
        mc_trials: Option<u64>,
    },
    /// Largest link failure probability meeting a cycle target, per node count.
    TolerablePlink {
        #[command(flatten)]
        link: LinkArgs,
        /// Cycle failure target.
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
    },
    /// Smallest nominal SNR meeting a cycle target, over repetition counts.
    MinSnr {
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
        /// Tabulate every node count from --n up to this value.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 8)]
        k1_max: usize,
        #[arg(long, default_value_t = 8)]
        k2_max: usize,
        /// Estimate by simulation with this many cycles (phase-refresh dynamics).
        #[arg(long)]
        mc_trials: Option<u64>,
    },
    /// Cartesian sweep described by a JSON scenario file.
    Sweep {
        scenario: PathBuf,
        /// Add Monte Carlo estimates and agreement flags.
        #[arg(long)]
        validate_mc: bool,
    },
}

#[derive(Serialize)]
struct MinSnrOutput {
    #[serde(flatten)]
    result: MinSnrRecord,
    scheme: &'static str,
    n: usize,
    target: f64,
    message_bits: f64,
    cycle_time_s: f64,
    bandwidth_hz: f64,
    p_off: f64,
    p_c: f64,
    p_g: f64,
}

#[derive(Serialize)]
struct McMinSnrOutput {
    feasible: bool,
    snr_db: f64,
    p_link: f64,
    method: &'static str,
    trials: u64,
    allowed_failures: u64,
    scheme: &'static str,
    n: usize,
    target: f64,
    dynamics: Dynamics,
    refresh: RefreshBoundary,
    cycle_time_s: f64,
    seed: u64,
}

pub fn run(cmd: &ProtocolCmd, ctx: &Context, out: &mut Outputs) -> anyhow::Result<()> {
    match cmd {
        ProtocolCmd::Outage {
            protocol,
            snr_db,
            mc_trials,
        } => outage(protocol, snr_db, *mc_trials, ctx, out),
        ProtocolCmd::TolerablePlink {
            link,
            target,
            n_min,
            n_max,
        } => {
            if n_min > n_max || *n_min == 0 {
                return Err(usage("need 1 <= --n-min <= --n-max"));
            }
            let mut t = CsvTable::new(["n", "max_p_link", "occupy_min_snr_db", "xor_min_snr_db"]);
            t.comment(format!(
                "target {}, m = {} bits, T = {} ms, W = {} Hz, no uncertainty budget",
                fmt_prob(*target),
                link.m,
                link.t_ms,
                link.bandwidth
            ));
            for n in *n_min..=*n_max {
                let p = max_tolerable_plink(n, *target)?;
                let snr = |scheme| {
                    let cfg = ProtocolArgs {
                        scheme,
                        n,
                        ..default_protocol(*link)
                    }
                    .config();
                    let rate = spectral_efficiency(&cfg);
                    urllc_core::linear_to_db((2f64.powf(rate) - 1.0) / -(-p).ln_1p())
                };
                t.push(vec![
                    n.to_string(),
                    fmt_prob(p),
                    fmt_db(snr(SchemeArg::Occupy)),
                    fmt_db(snr(SchemeArg::Xor)),
                ]);
            }
            out.csv("protocol_tolerable_plink.csv", &t)
        }
        ProtocolCmd::MinSnr {
            protocol,
            target,
            n_max,
            k1_max,
            k2_max,
            mc_trials,
        } => {
            let grid = SearchGrid {
                k1_max: *k1_max,
                k2_max: *k2_max,
            };
            let cfg = protocol.config();
            let budget = protocol.budget();
            if let Some(trials) = mc_trials {
                if n_max.is_some() {
                    return Err(usage("--mc-trials evaluates a single --n"));
                }
                if !budget.is_zero() || cfg.k1 != 1 || cfg.k2 != 1 {
                    return Err(usage("--mc-trials needs k1 = k2 = 1 and no uncertainty budget"));
                }
                let r = mc_min_snr(&cfg, *target, *trials, ctx.seed)?;
                let rec = McMinSnrOutput {
                    feasible: true,
                    snr_db: r.snr_db,
                    p_link: r.p_link,
                    method: "monte-carlo",
                    trials: r.trials,
                    allowed_failures: r.allowed_failures,
                    scheme: cfg.scheme.label(),
                    n: cfg.n,
                    target: *target,
                    dynamics: cfg.dynamics,
                    refresh: cfg.refresh,
                    cycle_time_s: cfg.cycle_time,
                    seed: ctx.seed,
                };
                return out.json("protocol_min_snr.json", &rec);
            }
            if cfg.dynamics != Dynamics::QuasiStatic || cfg.q.is_some() {
                return Err(usage(
                    "no closed form for phase-refresh or q-correlated links; pass --mc-trials",
                ));
            }
            match n_max {
                None => {
                    let r = min_snr(&cfg, &budget, *target, grid)?;
                    let rec = MinSnrOutput {
                        result: r.into(),
                        scheme: cfg.scheme.label(),
                        n: cfg.n,
                        target: *target,
                        message_bits: cfg.message_bits,
                        cycle_time_s: cfg.cycle_time,
                        bandwidth_hz: cfg.bandwidth,
                        p_off: budget.p_off,
                        p_c: budget.p_c,
                        p_g: budget.p_g,
                    };
                    out.json("protocol_min_snr.json", &rec)
                }
                Some(n_max) => {
                    if *n_max < cfg.n {
                        return Err(usage("--n-max must be at least --n"));
                    }
                    let mut t = CsvTable::new(["n", "feasible", "snr_db", "k1", "k2", "p_fail"]);
                    t.comment(format!("target {}, {}", fmt_prob(*target), describe(&cfg, &budget)));
                    for n in cfg.n..=*n_max {
                        let c = ProtocolConfig { n, ..cfg };
                        match min_snr(&c, &budget, *target, grid)? {
                            MinSnr::Feasible { snr_db, k1, k2, p_fail } => t.push(vec![
                                n.to_string(),
                                "true".into(),
                                fmt_db(snr_db),
                                k1.to_string(),
                                k2.to_string(),
                                fmt_prob(p_fail),
                            ]),
                            MinSnr::Infeasible => t.push(vec![
                                n.to_string(),
                                "false".into(),
                                String::new(),
                                String::new(),
                                String::new(),
                                String::new(),
                            ]),
                        }
                    }
                    out.csv("protocol_min_snr.csv", &t)
                }
            }
        }
        ProtocolCmd::Sweep { scenario, validate_mc } => {
            let text = std::fs::read_to_string(scenario)
                .map_err(|e| usage(format!("cannot read scenario {}: {e}", scenario.display())))?;
            let s = Scenario::from_json(&text)?;
            let opts = SweepOptions {
                analytic: true,
                monte_carlo: *validate_mc,
                timing: ctx.timing,
            };
            let name = "protocol_sweep.csv";
            let path = out.path(name);
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(file, "# trials = {}, seed = {}", s.trials, s.seed)?;
            writeln!(file, "{}", SweepRow::CSV_HEADER)?;
            sweep(&s, opts, |row| {
                writeln!(file, "{}", row.csv_line())
                    .and_then(|_| file.flush())
                    .map_err(|e| urllc_core::Error::Numeric(format!("writing {}: {e}", path.display())))
            })?;
            out.register(name);
            Ok(())
        }
    }
}

fn default_protocol(link: LinkArgs) -> ProtocolArgs {
    ProtocolArgs {
        scheme: SchemeArg::Occupy,
        n: 1,
        link,
        k1: 1,
        k2: 1,
        cap: None,
        dynamics: DynamicsArg::QuasiStatic,
        refresh: RefreshArg::EveryPhase,
        q: None,
        poff: 0.0,
        pc: 0.0,
        pg: 0.0,
    }
}

fn outage(
    protocol: &ProtocolArgs,
    snrs: &[f64],
    mc_trials: Option<u64>,
    ctx: &Context,
    out: &mut Outputs,
) -> anyhow::Result<()> {
    let cfg = protocol.config();
    let budget = protocol.budget();
    cfg.validate()?;
    budget.validate()?;
    let closed_form = cfg.dynamics == Dynamics::QuasiStatic && cfg.q.is_none();
    if !closed_form && mc_trials.is_none() {
        return Err(usage("no closed form for phase-refresh or q-correlated links; pass --mc-trials"));
    }
    let mut t = CsvTable::new([
        "snr_db", "p_link", "p_fail", "p_fail_downlink", "p_fail_uplink", "mc_p_hat", "mc_ci_low", "mc_ci_high",
    ]);
    t.comment(describe(&cfg, &budget));
    t.comment(format!("spectral efficiency = {} bit/s/Hz, seed = {}", spectral_efficiency(&cfg), ctx.seed));
    for (k, &snr) in snrs.iter().enumerate() {
        let mut row = vec![fmt_db(snr)];
        if closed_form {
            let r = robust_cycle_outage(&cfg, snr, &budget)?;
            row.push(fmt_prob(r.p_link));
            row.push(fmt_prob(r.p_fail));
            row.extend(r.per_phase.iter().map(|(_, v)| fmt_prob(*v)));
        } else {
            let p_w = link_outage(urllc_core::db_to_linear(snr), spectral_efficiency(&cfg));
            row.push(fmt_prob((p_w + budget.p_off).min(1.0)));
            row.extend([String::new(), String::new(), String::new()]);
        }
        match mc_trials {
            Some(trials) => {
                let e = estimate_outage(&cfg, LinkSpec::SnrDb(snr), &budget, trials, ctx.seed.wrapping_add(k as u64))?;
                row.extend([fmt_prob(e.p_hat), fmt_prob(e.ci95.0), fmt_prob(e.ci95.1)]);
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        t.push(row);
    }
    out.csv("protocol_outage.csv", &t)
}
