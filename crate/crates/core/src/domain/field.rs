//! Real-valued functions sampled at the interior nodes of a mesh.

use super::{DomainModel, GridSpec, Mesh};
use crate::error::{invalid, Error, Result};
use crate::quadrature::kahan_sum;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Interior nodal values on a mesh; boundary values are zero.
#[derive(Clone, Debug)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), mesh.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Field { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.len()];
        Field { mesh, values }
    }

    /// Sample a function at the nodes.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = mesh.sample(f);
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.domain() == other.mesh.domain() && self.mesh.grid() == other.mesh.grid())
        {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{} vs {}", self.mesh.grid(), other.mesh.grid())))
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { mesh: self.mesh.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Field { mesh: self.mesh.clone(), values })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a * b)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + s * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// Sign-preserving power `|u|^{q−1}u`; equals `u^q` where `u ≥ 0`.
    pub fn pointwise_power(&self, q: f64) -> Field {
        self.map(|v| v.abs().powf(q - 1.0) * v)
    }

    pub fn positive_part(&self) -> Field {
        self.map(|v| v.max(0.0))
    }

    pub fn negative_part(&self) -> Field {
        self.map(|v| (-v).max(0.0))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ u` with the lumped mass.
    pub fn integral(&self) -> f64 {
        kahan_sum(self.values.iter().zip(self.mesh.mass()).map(|(v, m)| v * m))
    }

    /// `∫ u·v` with the lumped mass.
    pub fn l2_dot(&self, other: &Field) -> Result<f64> {
        self.check(other)?;
        Ok(kahan_sum(self.values.iter().zip(&other.values).zip(self.mesh.mass()).map(|((a, b), m)| a * b * m)))
    }

    /// `(∫|u|^q)^{1/q}`.
    pub fn lp_norm(&self, q: f64) -> f64 {
        kahan_sum(self.values.iter().zip(self.mesh.mass()).map(|(v, m)| v.abs().powf(q) * m)).powf(1.0 / q)
    }

    /// Value at an arbitrary point of the closed domain.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        self.mesh.interpolate(&self.values, x, &|_| 0.0)
    }

    /// CSV with a `# domain=… n=… grid=…` header and `index,x1..xn,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.mesh.n();
        writeln!(w, "# domain={} n={} grid={}", self.mesh.domain(), n, self.mesh.grid())?;
        let cols: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
        writeln!(w, "index,{},value", cols.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let xs: Vec<String> = self.mesh.node(i).iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{i},{},{v:e}", xs.join(","))?;
        }
        Ok(())
    }

    /// Parse a CSV written by [`Field::write_csv`], rebuilding its mesh.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Field> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        let bad = |m: &str| Error::Parse(format!("field header: {m}"));
        let body = header.strip_prefix("# ").ok_or_else(|| bad("missing '# '"))?;
        let (mut domain, mut n, mut grid) = (None, None, None);
        for tok in body.split_whitespace() {
            match tok.split_once('=') {
                Some(("domain", v)) => domain = Some(v.parse::<DomainModel>()?),
                Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|_| bad("bad n"))?),
                Some(("grid", v)) => grid = Some(v.parse::<GridSpec>()?),
                _ => return Err(bad(tok)),
            }
        }
        let domain = domain.ok_or_else(|| bad("no domain"))?;
        if n != Some(domain.n()) {
            return Err(bad("dimension disagrees with domain"));
        }
        let mesh = Mesh::build(&domain, &grid.ok_or_else(|| bad("no grid"))?)?;
        lines.next().ok_or_else(|| bad("missing column row"))??;
        let mut values = vec![f64::NAN; mesh.len()];
        let mut seen = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != domain.n() + 2 {
                return Err(Error::Parse(format!("row '{line}' has {} columns", parts.len())));
            }
            let i: usize = parts[0].parse().map_err(|_| Error::Parse(format!("bad index in '{line}'")))?;
            let v: f64 = parts[parts.len() - 1].parse().map_err(|_| Error::Parse(format!("bad value in '{line}'")))?;
            if i >= values.len() {
                return Err(Error::GridMismatch(format!("index {i} beyond {} nodes", values.len())));
            }
            values[i] = v;
            seen += 1;
        }
        if seen != mesh.len() {
            return Err(Error::GridMismatch(format!("{seen} rows for {} nodes", mesh.len())));
        }
        Field::new(mesh, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::{critical_exponent, eval_bubble, BubbleParams};

    fn radial_mesh() -> Arc<Mesh> {
        Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(64)).unwrap()
    }

    #[test]
    fn arithmetic() {
        let m = radial_mesh();
        let neg = Field::from_fn(m.clone(), |x| -1.0 - x[0]).unwrap();
        assert_eq!(neg.positive_part().max_abs(), 0.0);
        assert_eq!(neg.scale(0.0).max_abs(), 0.0);
        let b = BubbleParams::centered(3, 0.1).unwrap();
        let u = Field::from_fn(m.clone(), |x| eval_bubble(&b, x).unwrap()).unwrap();
        let p = critical_exponent(3);
        for (i, v) in u.pointwise_power(p).values().iter().enumerate() {
            let exact = eval_bubble(&b, m.node(i)).unwrap().powf(p);
            assert!((v - exact).abs() <= 1e-12 * exact);
        }
        let other = Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(32)).unwrap();
        assert!(u.add(&Field::zeros(other)).is_err());
        let ones = Field::from_fn(m, |_| 1.0).unwrap();
        assert!((ones.integral() - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let m = Mesh::build(&DomainModel::unit_cube(2).unwrap(), &GridSpec::tensor(16)).unwrap();
        let f = Field::from_fn(m, |x| x[0].sin() * x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# domain=box:0..1,0..1 n=2 grid=tensor:ppa=16\nindex,x1,x2,value\n"));
        let g = Field::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(g.values(), f.values());
    }
}
