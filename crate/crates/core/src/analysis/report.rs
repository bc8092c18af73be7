use std::fmt;

/// One checked inequality `lhs >= rhs` (up to `slack`).
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Assertion {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let pass = lhs >= rhs - slack;
        Assertion { name: name.into(), lhs, rhs, slack, pass }
    }

    /// A pass/fail line with no inequality behind it.
    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        let v = if pass { 1.0 } else { 0.0 };
        Assertion { name: name.into(), lhs: v, rhs: 1.0, slack: 0.0, pass }
    }

    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Structured text report: one `name,lhs,rhs,margin,pass|fail` line per assertion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), ..Default::default() }
    }

    pub fn check(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> bool {
        let a = Assertion::new(name, lhs, rhs, slack);
        let pass = a.pass;
        self.assertions.push(a);
        pass
    }

    pub fn push(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    pub fn merge(&mut self, other: Report) {
        self.assertions.extend(other.assertions);
        self.notes.extend(other.notes);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.title)?;
        for n in &self.notes {
            writeln!(f, "# {n}")?;
        }
        writeln!(f, "name,lhs,rhs,margin,result")?;
        for a in &self.assertions {
            let verdict = if a.pass { "pass" } else { "fail" };
            writeln!(f, "{},{:?},{:?},{:?},{}", a.name, a.lhs, a.rhs, a.margin(), verdict)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_and_rendering() {
        let mut r = Report::new("demo");
        assert!(r.check("tight", 1.0, 1.0 + 1e-12, 1e-9));
        assert!(!r.check("loose", 0.0, 1.0, 1e-9));
        assert!(!r.passed());
        let text = r.to_string();
        assert!(text.contains("tight,1.0,1.000000000001,"));
        assert!(text.lines().last().unwrap().ends_with(",fail"));
    }
}
