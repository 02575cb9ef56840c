use std::fmt::Write;

/// One critic update, plus the generator update that followed it if any.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub iteration: u64,
    pub epoch: u64,
    pub d_loss: f64,
    pub g_loss: Option<f64>,
    pub penalty: f64,
    pub d_grad_norm: f64,
    pub g_grad_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub epoch: u64,
    pub iteration: u64,
    pub delay_spread_real_ns: f64,
    pub delay_spread_gen_ns: f64,
    pub delay_spread_rel_gap: f64,
    pub angular_spread_real_deg: f64,
    pub angular_spread_gen_deg: f64,
    pub angular_spread_rel_gap: f64,
}

/// Append-only training telemetry, ordered by iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub evals: Vec<EvalRecord>,
}

pub const RECORD_HEADER: &str = "iteration,epoch,d_loss,g_loss,penalty,d_grad_norm,g_grad_norm";
pub const EVAL_HEADER: &str = "epoch,iteration,delay_spread_real_ns,delay_spread_gen_ns,\
delay_spread_rel_gap,angular_spread_real_deg,angular_spread_gen_deg,angular_spread_rel_gap";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl TrainRecord {
    /// CSV row; a missing generator update leaves its columns empty.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{},{:e},{:e},{}",
            self.iteration,
            self.epoch,
            self.d_loss,
            opt(self.g_loss),
            self.penalty,
            self.d_grad_norm,
            opt(self.g_grad_norm)
        )
    }
}

impl EvalRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.iteration,
            self.delay_spread_real_ns,
            self.delay_spread_gen_ns,
            self.delay_spread_rel_gap,
            self.angular_spread_real_deg,
            self.angular_spread_gen_deg,
            self.angular_spread_rel_gap
        )
    }
}

impl TrainLog {
    pub fn records_csv(&self) -> String {
        let mut out = format!("{RECORD_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(out, "{}", r.csv_row());
        }
        out
    }

    pub fn evals_csv(&self) -> String {
        let mut out = format!("{EVAL_HEADER}\n");
        for r in &self.evals {
            let _ = writeln!(out, "{}", r.csv_row());
        }
        out
    }
}
