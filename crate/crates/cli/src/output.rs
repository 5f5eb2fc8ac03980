//! CSV tables written by the commands.

use std::path::Path;

use marc_core::{Receiver, SolveOutcome, SolveStatus, User};

/// Formats like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Classified => "classified",
        SolveStatus::DegenerateClassification => "degenerate",
    }
}

/// Column names of the eight corner rates, `r<user>_<receiver>_<max|min>`.
const CORNER_COLUMNS: [&str; 8] = [
    "r1_relay_max",
    "r1_relay_min",
    "r2_relay_max",
    "r2_relay_min",
    "r1_dest_max",
    "r1_dest_min",
    "r2_dest_max",
    "r2_dest_min",
];

fn corner_values(out: &SolveOutcome) -> [f64; 8] {
    let s = &out.summary;
    let mut v = [0.0; 8];
    let mut k = 0;
    for rx in [Receiver::Relay, Receiver::Destination] {
        for user in [User::One, User::Two] {
            v[k] = s.rmax(user, rx);
            v[k + 1] = s.rmin(user, rx);
            k += 2;
        }
    }
    v
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}

fn alpha_cells(alpha: &[f64]) -> [String; 2] {
    [
        fmt_opt(alpha.first().copied()),
        fmt_opt(alpha.get(1).copied()),
    ]
}

fn nu_cells(nu: &[Option<f64>; 3]) -> [String; 3] {
    nu.map(fmt_opt)
}

pub fn outcome_csv(out: &SolveOutcome) -> Vec<u8> {
    let mut w = writer();
    let mut header = vec![
        "label", "status", "sum_rate", "nu1", "nu2", "nu_r", "alpha1", "alpha2",
    ];
    header.extend(CORNER_COLUMNS);
    header.push("margins");
    w.write_record(&header).expect("in-memory write");

    let mut row = vec![
        out.label.to_string(),
        status_str(out.status).to_string(),
        fmt_num(out.sum_rate),
    ];
    row.extend(nu_cells(&out.duals.nu));
    row.extend(alpha_cells(&out.duals.alpha));
    row.extend(corner_values(out).map(fmt_num));
    let margins: Vec<String> = out.margins().iter().map(|m| fmt_num(m.value)).collect();
    row.push(margins.join(";"));
    w.write_record(&row).expect("in-memory write");
    finish(w)
}

pub fn policy_csv(out: &SolveOutcome, weights: &[f64]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(["state", "weight", "p1", "p2", "pr"])
        .expect("in-memory write");
    let p = &out.policy;
    for (i, &wt) in weights.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_num(wt),
            fmt_num(p.p1[i]),
            fmt_num(p.p2[i]),
            fmt_num(p.pr[i]),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// One evaluated sweep point.
#[derive(Debug, Clone)]
pub enum SweepRow {
    Solved(Box<SolveOutcome>),
    Failed { code: i32, message: String },
}

pub fn sweep_csv(values: &[f64], rows: &[SweepRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record([
        "value", "label", "status", "sum_rate", "nu1", "nu2", "nu_r", "alpha1", "alpha2", "code",
        "error",
    ])
    .expect("in-memory write");
    for (&v, row) in values.iter().zip(rows) {
        let mut rec = vec![fmt_num(v)];
        match row {
            SweepRow::Solved(out) => {
                rec.push(out.label.to_string());
                rec.push(status_str(out.status).to_string());
                rec.push(fmt_num(out.sum_rate));
                rec.extend(nu_cells(&out.duals.nu));
                rec.extend(alpha_cells(&out.duals.alpha));
                let code = match out.status {
                    SolveStatus::Classified => 0,
                    SolveStatus::DegenerateClassification => 3,
                };
                rec.push(code.to_string());
                rec.push(String::new());
            }
            SweepRow::Failed { code, message } => {
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(code.to_string());
                rec.push(message.clone());
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

pub fn verify_csv(case_rate: f64, oracle_rate: f64) -> Vec<u8> {
    let mut w = writer();
    w.write_record(["case_sum_rate", "oracle_sum_rate", "gap"])
        .expect("in-memory write");
    w.write_record([
        fmt_num(case_rate),
        fmt_num(oracle_rate),
        fmt_num(case_rate - oracle_rate),
    ])
    .expect("in-memory write");
    finish(w)
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), bytes)
}
