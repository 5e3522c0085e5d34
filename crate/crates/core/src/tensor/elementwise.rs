use super::{Backward, Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

impl Backward for Binary {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let (a, b) = (inputs[0].data(), inputs[1].data());
        let ga = needs[0].then(|| match self {
            Binary::Add | Binary::Sub => g.to_vec(),
            Binary::Mul => g.iter().zip(b).map(|(g, b)| g * b).collect(),
        });
        let gb = needs[1].then(|| match self {
            Binary::Add => g.to_vec(),
            Binary::Sub => g.iter().map(|g| -g).collect(),
            Binary::Mul => g.iter().zip(a).map(|(g, a)| g * a).collect(),
        });
        vec![ga, gb]
    }
}

struct ScaleBy(f32);

impl Backward for ScaleBy {
    fn backward(&self, _: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        vec![needs[0].then(|| g.iter().map(|g| g * self.0).collect())]
    }
}

struct Sum;

impl Backward for Sum {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        vec![needs[0].then(|| vec![g[0]; inputs[0].len()])]
    }
}

struct Relu;

impl Backward for Relu {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        vec![needs[0].then(|| {
            inputs[0]
                .data()
                .iter()
                .zip(g)
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect()
        })]
    }
}

struct L1;

impl Backward for L1 {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let (p, t) = (inputs[0].data(), inputs[1].data());
        let k = g[0] / p.len() as f32;
        let sign: Vec<f32> = p
            .iter()
            .zip(t)
            .map(|(p, t)| {
                let d = p - t;
                if d > 0.0 {
                    k
                } else if d < 0.0 {
                    -k
                } else {
                    0.0
                }
            })
            .collect();
        let gt = needs[1].then(|| sign.iter().map(|s| -s).collect());
        vec![needs[0].then_some(sign), gt]
    }
}

impl Tape {
    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                expected: sa,
                got: sb,
            });
        }
        Ok(sa)
    }

    fn binary(&mut self, op: &'static str, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let shape = self.check_same(op, a, b)?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let data = x
            .iter()
            .zip(y)
            .map(|(x, y)| match kind {
                Binary::Add => x + y,
                Binary::Sub => x - y,
                Binary::Mul => x * y,
            })
            .collect();
        Ok(self.record(Tensor::new(shape, data), &[a, b], kind))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", Binary::Mul, a, b)
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.record(out, &[a], ScaleBy(s))
    }

    /// Sum of all elements as a scalar tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().map(|&v| v as f64).sum::<f64>();
        self.record(Tensor::scalar(total as f32), &[a], Sum)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.record(out, &[a], Relu)
    }

    /// Mean absolute difference as a scalar tensor.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.check_same("l1_loss", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let total: f64 = p.iter().zip(t).map(|(p, t)| (p - t).abs() as f64).sum();
        let out = Tensor::scalar((total / p.len() as f64) as f32);
        Ok(self.record(out, &[pred, target], L1))
    }
}
