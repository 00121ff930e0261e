//! CSV tables with a fixed header per output kind.

use std::io::Write;

use crate::format::num;

pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

pub const RETURN_MAP: &[&str] = &["y0", "p", "t_return", "div_integral", "status"];
pub const SEPARATRIX: &[&str] = &["d", "U", "S", "err_U", "err_S"];
pub const HOMOCLINIC: &[&str] = &["a", "b", "c", "d0", "p0", "loop_stable", "iterations"];
pub const CENSUS: &[&str] = &["y_star", "stability", "p_prime", "period", "bracket_lo", "bracket_hi"];
pub const PARITY: &[&str] = &["d", "count", "parity", "d0", "consistent"];
pub const EPS_LIMIT: &[&str] = &["eps", "U", "S", "M_plus", "M_minus"];
pub const DIRAC: &[&str] = &["t", "x", "y", "z", "w", "H", "extra"];
pub const SPREAD: &[&str] = &["y_tilde", "y1", "y2", "ratio_forward", "ratio_backward"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_rows() {
        let mut t = Table::new(HOMOCLINIC);
        t.push(vec!["1".into(), "1".into(), "0".into(), num(-0.5), num(-0.7), "true".into(), "20".into()]);
        assert_eq!(
            t.render(),
            "a,b,c,d0,p0,loop_stable,iterations\n1,1,0,-5.0000000000000000e-1,-6.9999999999999996e-1,true,20\n"
        );
    }
}
