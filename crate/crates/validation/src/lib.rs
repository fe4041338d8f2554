//! Bookkeeping for the acceptance run: one line per criterion, collected so
//! that every criterion runs even when an earlier one fails.

use std::time::Duration;

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl Verdict {
    pub fn line(&self) -> String {
        let time = match self.limit {
            Some(l) => format!("{:.1}s (limit {}s)", self.elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", self.elapsed.as_secs_f64()),
        };
        format!(
            "{} [{:>2}] {}: {}; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            time
        )
    }
}

#[derive(Debug, Default)]
pub struct Ledger {
    pub verdicts: Vec<Verdict>,
}

impl Ledger {
    /// Records a criterion. A time limit, when given, is part of the verdict.
    pub fn record(&mut self, id: u32, name: &str, passed: bool, detail: String, elapsed: Duration, limit: Option<Duration>) {
        let passed = passed && limit.is_none_or(|l| elapsed <= l);
        let v = Verdict { id, name: name.to_string(), passed, detail, elapsed, limit };
        println!("{}", v.line());
        self.verdicts.push(v);
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self.failures().iter().map(|v| v.id.to_string()).collect();
        if failed.is_empty() {
            format!("{} of {} criteria pass", self.verdicts.len(), self.verdicts.len())
        } else {
            format!(
                "{} of {} criteria pass; failing: {}",
                self.verdicts.len() - failed.len(),
                self.verdicts.len(),
                failed.join(", ")
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_overrun_fails() {
        let mut l = Ledger::default();
        l.record(1, "fast", true, "ok".into(), Duration::from_secs(1), Some(Duration::from_secs(2)));
        l.record(2, "slow", true, "ok".into(), Duration::from_secs(3), Some(Duration::from_secs(2)));
        l.record(3, "wrong", false, "no".into(), Duration::from_secs(0), None);
        assert_eq!(l.failures().len(), 2);
        assert!(l.verdicts[0].line().starts_with("PASS [ 1] fast: ok; 1.0s (limit 2s)"));
        assert_eq!(l.summary(), "1 of 3 criteria pass; failing: 2, 3");
    }
}
