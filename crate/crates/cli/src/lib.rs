//! The `bdps` command line.
//!
//! Exit codes: 0 success, 1 domain error (an invalid id, every ingest line
//! rejected, an API error), 2 usage or configuration error.

pub mod client;
pub mod config;
pub mod serve;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};

use bdps_core::nid::parse_nid;
use bdps_core::registry::{parse_csv, parse_jsonl, FieldVerdict, IngestLine, Registry};
use bdps_core::simharness::{Scenario, Simulation};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::client::{Client, ClientError};
use crate::config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Scenarios shipped inside the binary, found by file name when no such
/// file exists on disk.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("failover.scn", include_str!("../scenarios/failover.scn")),
    ("elastic-step.scn", include_str!("../scenarios/elastic-step.scn")),
];

#[derive(Debug, Parser)]
#[command(name = "bdps", version, about = "People registry: ingest, serve, simulate and administer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a 13-digit national id and print its parts.
    Nid { text: String },
    /// Bulk-insert citizens into `<data-dir>/local` (serve must be stopped).
    Ingest {
        file: PathBuf,
        #[arg(long, default_value = "./bdps-data")]
        data_dir: PathBuf,
        /// Defaults to the file extension (.csv or anything else as jsonl).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run the gateway HTTP API until SIGINT/SIGTERM.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `data_dir` from the config file.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Overrides `listen_address` from the config file.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run a scenario in the simulator and write its report files.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated milliseconds; defaults to the scenario's `horizon_ms`.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value = "./sim-out")]
        out: PathBuf,
    },
    /// Verify claimed fields of one citizen against the registry.
    Verify {
        #[command(flatten)]
        conn: Conn,
        nid: String,
        /// FIELD=VALUE, repeatable.
        #[arg(long = "claim", required = true)]
        claims: Vec<String>,
    },
    /// Print health, metrics or an invoice from a running server.
    Report {
        #[command(flatten)]
        conn: Conn,
        #[command(subcommand)]
        what: ReportKind,
    },
    /// Operator actions on a running server.
    Admin {
        #[command(flatten)]
        conn: Conn,
        #[command(subcommand)]
        action: AdminAction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct Conn {
    #[arg(long, default_value = "http://127.0.0.1:8080", global = true)]
    pub server: String,
    /// kind:id, e.g. corporate:acme or authority:ops.
    #[arg(long, env = "BDPS_PRINCIPAL", global = true)]
    pub principal: Option<String>,
    #[arg(long, env = "BDPS_SECRET", global = true, hide_env_values = true)]
    pub secret: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ReportKind {
    Health,
    /// The autoscaler trace as CSV.
    Metrics,
    Invoice {
        /// Account key; defaults to the logged-in principal.
        #[arg(long)]
        key: Option<String>,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long)]
        to: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AdminAction {
    /// Change autoscaler policy fields; unspecified ones stay.
    Scale {
        #[arg(long)]
        min_on: Option<u32>,
        #[arg(long)]
        max_local: Option<u32>,
        #[arg(long)]
        capacity_per_worker: Option<f64>,
        #[arg(long)]
        scale_up_threshold: Option<f64>,
        #[arg(long)]
        cooldown: Option<u64>,
        #[arg(long)]
        overflow_queue_cap: Option<usize>,
    },
    Promote,
    Resync,
    Checkpoint,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("bdps: {msg}");
    code
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Nid { text } => cmd_nid(&text),
        Command::Ingest { file, data_dir, format } => cmd_ingest(&file, &data_dir, format),
        Command::Serve { config, data_dir, listen } => cmd_serve(config.as_deref(), data_dir, listen),
        Command::Simulate { scenario, seed, horizon, out } => cmd_simulate(&scenario, seed, horizon, &out),
        Command::Verify { conn, nid, claims } => cmd_verify(&conn, &nid, &claims),
        Command::Report { conn, what } => cmd_report(&conn, what),
        Command::Admin { conn, action } => cmd_admin(&conn, action),
    }
}

fn cmd_nid(text: &str) -> i32 {
    match parse_nid(text) {
        Ok(id) => {
            let v = json!({
                "canonical": id.canonical(),
                "district": id.district,
                "rmo": id.rmo,
                "thana": id.thana,
                "union": id.union_code,
                "serial": id.serial,
            });
            println!("{v}");
            EXIT_OK
        }
        Err(e) => fail(EXIT_DOMAIN, e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestCounts {
    pub inserted: usize,
    pub rejected: Vec<(usize, String)>,
}

/// Inserts every parsed line; a failed line does not stop the rest.
pub fn ingest_lines(reg: &mut Registry, lines: Vec<IngestLine>) -> IngestCounts {
    let mut counts = IngestCounts { inserted: 0, rejected: Vec::new() };
    for l in lines {
        let result = l.record.and_then(|r| reg.insert_citizen(r).map(drop).map_err(|e| e.to_string()));
        match result {
            Ok(()) => counts.inserted += 1,
            Err(e) => counts.rejected.push((l.line, e)),
        }
    }
    counts
}

fn cmd_ingest(file: &Path, data_dir: &Path, format: Option<Format>) -> i32 {
    let f = match File::open(file) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", file.display())),
    };
    let format = format.unwrap_or(match file.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        _ => Format::Jsonl,
    });
    let lines = match format {
        Format::Jsonl => parse_jsonl(BufReader::new(f)).map_err(|e| e.to_string()),
        Format::Csv => parse_csv(f).map_err(|e| e.to_string()),
    };
    let lines = match lines {
        Ok(l) => l,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", file.display())),
    };
    let mut reg = match Registry::open(data_dir.join("local")) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", data_dir.display())),
    };
    let total = lines.len();
    let counts = ingest_lines(&mut reg, lines);
    for (line, reason) in &counts.rejected {
        eprintln!("line {line}: {reason}");
    }
    println!("{}", json!({ "inserted": counts.inserted, "rejected": counts.rejected.len(), "total": total }));
    if total > 0 && counts.inserted == 0 {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    }
}

fn cmd_serve(config: Option<&Path>, data_dir: Option<PathBuf>, listen: Option<String>) -> i32 {
    let mut cfg = match config.map(Config::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Some(d) = data_dir {
        cfg.data_dir = d;
    }
    if let Some(l) = listen {
        cfg.listen_address = l;
    }
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(EXIT_DOMAIN, e),
    };
    let result = rt.block_on(serve::serve(cfg, |addr| {
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();
    }));
    match result {
        Ok(()) => EXIT_OK,
        Err(e @ (serve::ServeError::AddressInUse(_) | serve::ServeError::Config(_))) => fail(EXIT_USAGE, e),
        Err(e) => fail(EXIT_DOMAIN, e),
    }
}

/// Reads a scenario file, falling back to a bundled one of the same name.
pub fn load_scenario(path: &Path) -> Result<String, String> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            BUNDLED_SCENARIOS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| format!("{}: {e}", path.display()))
        }
    }
}

fn cmd_simulate(path: &Path, seed: Option<u64>, horizon: Option<u64>, out: &Path) -> i32 {
    let text = match load_scenario(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let seed = seed.unwrap_or(scenario.seed);
    let horizon = horizon.unwrap_or(scenario.horizon_ms);
    let report = match Simulation::new(&scenario, seed, horizon) {
        Ok(sim) => sim.run(),
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let files = [
        ("metrics.csv", report.metrics_csv()),
        ("requests.csv", report.requests_csv()),
        ("events.jsonl", report.events_jsonl()),
        ("summary.txt", report.summary()),
    ];
    if let Err(e) = fs::create_dir_all(out) {
        return fail(EXIT_USAGE, format!("{}: {e}", out.display()));
    }
    for (name, body) in files {
        if let Err(e) = fs::write(out.join(name), body) {
            return fail(EXIT_USAGE, format!("{}: {e}", out.join(name).display()));
        }
    }
    print!("{}", report.summary());
    EXIT_OK
}

fn connect(conn: &Conn) -> Result<Client, i32> {
    let mut client = Client::new(&conn.server);
    match (&conn.principal, &conn.secret) {
        (Some(p), Some(s)) => client.login(p, s).map_err(client_fail)?,
        (None, None) => {}
        _ => return Err(fail(EXIT_USAGE, "--principal and --secret go together")),
    }
    Ok(client)
}

fn client_fail(e: ClientError) -> i32 {
    fail(EXIT_DOMAIN, e)
}

fn parse_claims(claims: &[String]) -> Result<BTreeMap<String, String>, String> {
    claims
        .iter()
        .map(|c| {
            c.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .ok_or_else(|| format!("claim {c:?} is not FIELD=VALUE"))
        })
        .collect()
}

fn cmd_verify(conn: &Conn, nid: &str, claims: &[String]) -> i32 {
    let claims = match parse_claims(claims) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let client = match connect(conn) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let path = format!("/citizens/{}/verify", nid.trim());
    let v = match client.call("POST", &path, Some(&json!({ "claims": claims }))).and_then(|r| r.ok_json()) {
        Ok(v) => v,
        Err(e) => return client_fail(e),
    };
    let results: BTreeMap<String, FieldVerdict> = match v.get("results").cloned().map(serde_json::from_value) {
        Some(Ok(r)) => r,
        _ => return fail(EXIT_DOMAIN, format!("unexpected response: {v}")),
    };
    for (field, verdict) in results {
        println!("{field}: {}", verdict.legacy_text());
    }
    EXIT_OK
}

fn print_reply(reply: Result<client::Reply, ClientError>, raw: bool) -> i32 {
    match reply {
        Ok(r) if raw && (200..300).contains(&r.status) => {
            print!("{}", r.text);
            EXIT_OK
        }
        Ok(r) => match r.ok_json() {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                EXIT_OK
            }
            Err(e) => client_fail(e),
        },
        Err(e) => client_fail(e),
    }
}

fn cmd_report(conn: &Conn, what: ReportKind) -> i32 {
    let client = match connect(conn) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match what {
        ReportKind::Health => print_reply(client.call("GET", "/health", None), false),
        ReportKind::Metrics => print_reply(client.call("GET", "/metrics", None), true),
        ReportKind::Invoice { key, from, to } => {
            let mut path = format!("/invoice?from={from}");
            if let Some(to) = to {
                path.push_str(&format!("&to={to}"));
            }
            if let Some(key) = key {
                path.push_str(&format!("&key={}", percent_encode(&key)));
            }
            print_reply(client.call("GET", &path, None), false)
        }
    }
}

fn percent_encode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

fn cmd_admin(conn: &Conn, action: AdminAction) -> i32 {
    let client = match connect(conn) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (path, body) = match action {
        AdminAction::Scale { min_on, max_local, capacity_per_worker, scale_up_threshold, cooldown, overflow_queue_cap } => {
            let mut changes = serde_json::Map::new();
            let mut set = |k: &str, v: Option<Value>| {
                if let Some(v) = v {
                    changes.insert(k.to_string(), v);
                }
            };
            set("min_on", min_on.map(Value::from));
            set("max_local", max_local.map(Value::from));
            set("capacity_per_worker", capacity_per_worker.map(Value::from));
            set("scale_up_threshold", scale_up_threshold.map(Value::from));
            set("cooldown", cooldown.map(Value::from));
            set("overflow_queue_cap", overflow_queue_cap.map(Value::from));
            ("/admin/scale", Value::Object(changes))
        }
        AdminAction::Promote => ("/admin/promote", Value::Null),
        AdminAction::Resync => ("/admin/resync", Value::Null),
        AdminAction::Checkpoint => ("/admin/checkpoint", Value::Null),
    };
    let body = (!body.is_null()).then_some(&body);
    print_reply(client.call("POST", path, body), false)
}
