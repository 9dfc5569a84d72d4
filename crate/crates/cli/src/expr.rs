//! Expression mini-language for operators, states and scalars.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `*` between two operators is the matrix product. Names resolve to model
//! parameters, the constants `pi` and `im`, or zero-argument factories such as
//! `sigmaz`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use openq_core::qobj::{make_operator, make_state, tensor, OperatorParams, StateParams};
use openq_core::Qobj;

#[derive(Clone, Debug)]
pub enum Value {
    Scalar(C64),
    Op(Qobj),
}

impl Value {
    pub fn scalar(&self) -> Result<C64, String> {
        match self {
            Value::Scalar(z) => Ok(*z),
            Value::Op(_) => Err("expected a scalar, found an operator".into()),
        }
    }

    pub fn real(&self) -> Result<f64, String> {
        let z = self.scalar()?;
        if z.im != 0.0 {
            return Err(format!("expected a real number, found {z}"));
        }
        Ok(z.re)
    }

    pub fn qobj(self) -> Result<Qobj, String> {
        match self {
            Value::Op(q) => Ok(q),
            Value::Scalar(z) => Err(format!("expected an operator or state, found the scalar {z}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Num(s.parse().map_err(|_| format!("bad number '{s}'"))?));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

pub struct Env<'a> {
    pub params: &'a BTreeMap<String, f64>,
}

struct Parser<'a, 'b> {
    toks: Vec<Tok>,
    pos: usize,
    env: &'b Env<'a>,
}

fn binary(op: char, a: Value, b: Value) -> Result<Value, String> {
    use Value::*;
    let e = |x: openq_core::Error| x.to_string();
    Ok(match (op, a, b) {
        ('+', Scalar(x), Scalar(y)) => Scalar(x + y),
        ('-', Scalar(x), Scalar(y)) => Scalar(x - y),
        ('*', Scalar(x), Scalar(y)) => Scalar(x * y),
        ('/', Scalar(x), Scalar(y)) => Scalar(x / y),
        ('+', Op(x), Op(y)) => Op(x.try_add(&y).map_err(e)?),
        ('-', Op(x), Op(y)) => Op(x.try_sub(&y).map_err(e)?),
        ('*', Op(x), Op(y)) => Op(x.matmul(&y).map_err(e)?),
        ('*', Scalar(s), Op(x)) | ('*', Op(x), Scalar(s)) => Op(x.scale(s)),
        ('/', Op(x), Scalar(s)) => Op(x.scale(C64::new(1.0, 0.0) / s)),
        ('+' | '-', _, _) => return Err("cannot add a scalar and an operator".into()),
        ('/', _, _) => return Err("cannot divide by an operator".into()),
        _ => unreachable!("parser only emits + - * /"),
    })
}

impl Parser<'_, '_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Value, String> {
        let mut v = self.term()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(v);
            };
            let r = self.term()?;
            v = binary(op, v, r)?;
        }
    }

    fn term(&mut self) -> Result<Value, String> {
        let mut v = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(v);
            };
            let r = self.unary()?;
            v = binary(op, v, r)?;
        }
    }

    fn unary(&mut self) -> Result<Value, String> {
        if self.eat('-') {
            return binary('*', Value::Scalar(C64::new(-1.0, 0.0)), self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Value, String> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exp = self.unary()?.scalar()?;
        match base {
            Value::Scalar(z) => Ok(Value::Scalar(if exp.im == 0.0 && exp.re.fract() == 0.0 {
                z.powi(exp.re as i32)
            } else {
                z.powc(exp)
            })),
            Value::Op(q) => {
                if exp.im != 0.0 || exp.re.fract() != 0.0 || exp.re < 1.0 {
                    return Err("operator powers must be positive integers".into());
                }
                let mut out = q.clone();
                for _ in 1..exp.re as usize {
                    out = out.matmul(&q).map_err(|e| e.to_string())?;
                }
                Ok(Value::Op(out))
            }
        }
    }

    fn atom(&mut self) -> Result<Value, String> {
        let tok = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Num(x) => Ok(Value::Scalar(C64::new(x, 0.0))),
            Tok::Sym('(') => {
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err("missing ')'".into());
                }
                Ok(v)
            }
            Tok::Sym(c) => Err(format!("unexpected '{c}'")),
            Tok::Name(name) => {
                if self.eat('(') {
                    let mut args = Vec::new();
                    if !self.eat(')') {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(')') {
                                break;
                            }
                            if !self.eat(',') {
                                return Err(format!("expected ',' or ')' in the arguments of {name}"));
                            }
                        }
                    }
                    call(&name, args)
                } else {
                    self.name(&name)
                }
            }
        }
    }

    fn name(&self, name: &str) -> Result<Value, String> {
        if let Some(v) = self.env.params.get(name) {
            return Ok(Value::Scalar(C64::new(*v, 0.0)));
        }
        match name {
            "pi" => Ok(Value::Scalar(C64::new(std::f64::consts::PI, 0.0))),
            "im" => Ok(Value::Scalar(C64::new(0.0, 1.0))),
            _ => call(name, Vec::new()),
        }
    }
}

fn dim(v: &Value) -> Result<usize, String> {
    let x = v.real()?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(format!("expected a non-negative integer, found {x}"));
    }
    Ok(x as usize)
}

fn arity(name: &str, args: &[Value], n: usize) -> Result<(), String> {
    if args.len() != n {
        return Err(format!("{name} takes {n} argument(s), got {}", args.len()));
    }
    Ok(())
}

const SCALAR_FNS: [&str; 7] = ["sqrt", "exp", "cos", "sin", "conj", "abs", "real"];

fn call(name: &str, args: Vec<Value>) -> Result<Value, String> {
    use OperatorParams as O;
    use StateParams as S;
    let err = |e: openq_core::Error| e.to_string();
    if SCALAR_FNS.contains(&name) {
        arity(name, &args, 1)?;
        let z = args[0].scalar()?;
        return Ok(Value::Scalar(match name {
            "sqrt" => z.sqrt(),
            "exp" => z.exp(),
            "cos" => z.cos(),
            "sin" => z.sin(),
            "conj" => z.conj(),
            "abs" => C64::new(z.norm(), 0.0),
            _ => C64::new(z.re, 0.0),
        }));
    }
    match name {
        "dag" | "proj" | "unit" => {
            arity(name, &args, 1)?;
            let q = args.into_iter().next().expect("one argument").qobj()?;
            let r = match name {
                "dag" => Ok(q.dag()),
                "proj" => q.proj(),
                _ => q.unit(),
            };
            return Ok(Value::Op(r.map_err(err)?));
        }
        "tensor" => {
            if args.is_empty() {
                return Err("tensor needs at least one factor".into());
            }
            let qs = args.into_iter().map(Value::qobj).collect::<Result<Vec<_>, _>>()?;
            return Ok(Value::Op(tensor(&qs).map_err(err)?));
        }
        _ => {}
    }
    let op = match (name, args.len()) {
        ("sigmax" | "sigmay" | "sigmaz" | "sigmap" | "sigmam", 0) => Some(O::None),
        ("identity" | "qeye" | "qzero" | "create" | "destroy" | "num" | "position" | "momentum", 1) => {
            Some(O::Dim(dim(&args[0])?))
        }
        ("displace" | "squeeze", 2) => Some(O::DimComplex(dim(&args[0])?, args[1].scalar()?)),
        ("spin_Jx" | "spin_Jy" | "spin_Jz" | "spin_Jp" | "spin_Jm", 1) => Some(O::Spin(args[0].real()?)),
        _ => None,
    };
    if let Some(p) = op {
        return Ok(Value::Op(make_operator(name, &p, None).map_err(err)?));
    }
    let st = match (name, args.len()) {
        ("singlet_state", 0) => Some(S::None),
        ("basis" | "fock" | "fock_dm", 2) => Some(S::DimIndex(dim(&args[0])?, dim(&args[1])?)),
        ("coherent" | "coherent_dm", 2) => Some(S::DimAlpha(dim(&args[0])?, args[1].scalar()?)),
        ("thermal_dm", 2) => Some(S::DimReal(dim(&args[0])?, args[1].real()?)),
        ("maximally_mixed_dm" | "ghz_state" | "w_state", 1) => Some(S::Dim(dim(&args[0])?)),
        ("projection", 3) => Some(S::DimIndexPair(dim(&args[0])?, dim(&args[1])?, dim(&args[2])?)),
        ("spin_state", 2) => Some(S::Spin(args[0].real()?, args[1].real()?)),
        ("spin_coherent", 3) => Some(S::SpinAngles(args[0].real()?, args[1].real()?, args[2].real()?)),
        _ => None,
    };
    if let Some(p) = st {
        return Ok(Value::Op(make_state(name, &p, None).map_err(err)?));
    }
    Err(format!("unknown name or wrong number of arguments: {name}/{}", args.len()))
}

/// Evaluates `src` against the model parameters.
pub fn eval(src: &str, env: &Env<'_>) -> Result<Value, String> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, env };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input after position {}", p.pos));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use openq_core::qobj::{identity, sigmam, sigmaz};

    fn ev(src: &str) -> Result<Value, String> {
        let params = BTreeMap::from([("eps".to_string(), 2.0), ("gamma".to_string(), 0.25)]);
        eval(src, &Env { params: &params })
    }

    #[test]
    fn scalars() {
        assert_eq!(ev("1 + 2*3^2").unwrap().scalar().unwrap(), C64::new(19.0, 0.0));
        assert_eq!(ev("-sqrt(gamma)").unwrap().scalar().unwrap(), C64::new(-0.5, 0.0));
        assert_eq!(ev("2*im").unwrap().scalar().unwrap(), C64::new(0.0, 2.0));
        assert_eq!(ev("1.5e-1").unwrap().scalar().unwrap(), C64::new(0.15, 0.0));
    }

    #[test]
    fn operators() {
        let h = ev("0.5*eps*sigmaz").unwrap().qobj().unwrap();
        assert_eq!(h, sigmaz());
        let c = ev("sqrt(gamma) * sigmam").unwrap().qobj().unwrap();
        assert_eq!(c, sigmam().scale_real(0.5));
        let t = ev("tensor(sigmaz, identity(2))").unwrap().qobj().unwrap();
        assert_eq!(t, tensor(&[sigmaz(), identity(2).unwrap()]).unwrap());
        assert_eq!(t.dims().shape(), (4, 4));
        let n = ev("dag(destroy(3)) * destroy(3)").unwrap().qobj().unwrap();
        assert!((n.full().get(2, 2) - 2.0).norm() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(ev("sigmaz + 1").is_err());
        assert!(ev("sigmaz + destroy(3)").is_err());
        assert!(ev("frobnicate(2)").is_err());
        assert!(ev("(1 + 2").is_err());
        assert!(ev("1 2").is_err());
        assert!(ev("basis(2, 0.5)").is_err());
    }
}
