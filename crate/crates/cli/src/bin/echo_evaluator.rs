//! Reference evaluator for the subprocess protocol.
//!
//! Reads one JSON request per line from stdin and answers on stdout. By
//! default it answers with the toy2d formulas; flags inject the failure modes
//! a real simulator exhibits so the engine's handling of each can be tested.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use clap::Parser;
use lagbo::design_space::DesignPoint;
use lagbo::evaluators::toy2d;
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "echo-evaluator")]
struct Args {
    /// Answer every request with this BV instead of toy2d.
    #[arg(long, requires = "rsp_on")]
    bv: Option<f64>,
    /// Answer every request with this on-resistance instead of toy2d.
    #[arg(long, requires = "bv")]
    rsp_on: Option<f64>,
    /// Request ids answered with an error object.
    #[arg(long, value_delimiter = ',')]
    error_ids: Vec<u64>,
    /// Answer with an error whenever the first coordinate exceeds this.
    #[arg(long)]
    error_above: Option<f64>,
    /// Request ids left unanswered, to trigger the engine's timeout.
    #[arg(long, value_delimiter = ',')]
    hang_ids: Vec<u64>,
    /// Request ids answered with a line that is not JSON.
    #[arg(long, value_delimiter = ',')]
    garbage_ids: Vec<u64>,
    /// Exit with status 3 on receiving these request ids.
    #[arg(long, value_delimiter = ',')]
    exit_ids: Vec<u64>,
    /// Append every request line to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    #[allow(dead_code)]
    names: Vec<String>,
    x: Vec<f64>,
}

fn main() {
    let args = Args::parse();
    let set = |v: &[u64]| v.iter().copied().collect::<HashSet<u64>>();
    let (errors, hangs, garbage, exits) = (
        set(&args.error_ids),
        set(&args.hang_ids),
        set(&args.garbage_ids),
        set(&args.exit_ids),
    );
    let mut log = args.log.as_ref().map(|p| {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .expect("log file opens")
    });

    let stdout = io::stdout();
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if let Some(f) = log.as_mut() {
            let _ = writeln!(f, "{line}");
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                let mut out = stdout.lock();
                let _ = writeln!(out, "{}", json!({"id": null, "error": e.to_string()}));
                let _ = out.flush();
                continue;
            }
        };
        if exits.contains(&req.id) {
            std::process::exit(3);
        }
        if hangs.contains(&req.id) {
            // long enough to outlive any test timeout, short enough to exit
            thread::sleep(Duration::from_secs(30));
            continue;
        }
        let reply = if garbage.contains(&req.id) {
            "this is not json".to_owned()
        } else if errors.contains(&req.id) || args.error_above.is_some_and(|t| req.x.first().is_some_and(|v| *v > t)) {
            json!({"id": req.id, "error": "injected failure"}).to_string()
        } else if let (Some(bv), Some(rsp_on)) = (args.bv, args.rsp_on) {
            json!({"id": req.id, "bv": bv, "rsp_on": rsp_on}).to_string()
        } else {
            match toy2d(&DesignPoint::new(req.x)) {
                Ok(e) => json!({"id": req.id, "bv": e.bv, "rsp_on": e.rsp_on}).to_string(),
                Err(e) => json!({"id": req.id, "error": e.to_string()}).to_string(),
            }
        };
        let mut out = stdout.lock();
        let _ = writeln!(out, "{reply}");
        let _ = out.flush();
    }
}
