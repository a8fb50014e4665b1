//! Operator semantics over possibly-uncertain operands.
//!
//! Operators act on the unwrapped values. The result score is the product
//! of operand scores for arithmetic and comparison, the minimum for `and`
//! and the maximum for `or`; a plain operand counts as score 1, and a
//! score-1 result is returned unwrapped.

use super::error::{ErrorKind, RuntimeError};
use super::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    And,
    Or,
}

/// Score of `v`: its attached confidence, or 1.0 for any plain value.
pub fn evaluate_confidence(v: &Value) -> f64 {
    v.score()
}

pub fn combine_scores(op: BinOp, p1: f64, p2: f64) -> f64 {
    match op {
        BinOp::And => p1.min(p2),
        BinOp::Or => p1.max(p2),
        _ => p1 * p2,
    }
}

pub fn combine_uncertain(op: BinOp, lhs: &Value, rhs: &Value) -> Result<Value, RuntimeError> {
    let inner = apply(op, lhs.unwrapped(), rhs.unwrapped())?;
    Ok(Value::uncertain(inner, combine_scores(op, lhs.score(), rhs.score())))
}

/// Deep equality ignoring confidence wrappers at every level.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a.unwrapped(), b.unwrapped()) {
        (Value::List(x), Value::List(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| values_equal(a, b)),
        (Value::Map(x), Value::Map(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|((ka, a), (kb, b))| ka == kb && values_equal(a, b))
        }
        (Value::Struct(x), Value::Struct(y)) => {
            x.type_name == y.type_name
                && x.fields.len() == y.fields.len()
                && x.fields.iter().zip(&y.fields).all(|((ka, a), (kb, b))| ka == kb && values_equal(a, b))
        }
        (a, b) => a == b,
    }
}

fn concat_text(v: &Value) -> Result<String, RuntimeError> {
    if v.contains_identity() {
        return Err(RuntimeError::capability("Identity cannot be coerced to Str"));
    }
    Ok(v.render())
}

fn apply(op: BinOp, a: &Value, b: &Value) -> Result<Value, RuntimeError> {
    use Value::*;
    let mismatch = || {
        RuntimeError::type_error(format!(
            "unsupported operand types for {op:?}: {} and {}",
            a.type_name(),
            b.type_name()
        ))
    };
    Ok(match op {
        BinOp::Add => match (a, b) {
            (Num(x), Num(y)) => Num(x + y),
            (List(x), List(y)) => List(x.iter().chain(y).cloned().collect()),
            (Str(_), _) | (_, Str(_)) => Str(concat_text(a)? + &concat_text(b)?),
            _ => return Err(mismatch()),
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let (Num(x), Num(y)) = (a, b) else {
                return Err(mismatch());
            };
            match op {
                BinOp::Sub => Num(x - y),
                BinOp::Mul => Num(x * y),
                _ if *y == 0.0 => return Err(RuntimeError::new(ErrorKind::RuntimeError, "division by zero")),
                _ => Num(x / y),
            }
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Num(x), Num(y)) => x.partial_cmp(y),
                (Str(x), Str(y)) => Some(x.cmp(y)),
                _ => return Err(mismatch()),
            };
            let Some(ord) = ord else { return Ok(Bool(false)) };
            Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinOp::Eq => Bool(values_equal(a, b)),
        BinOp::And | BinOp::Or => {
            let (Bool(x), Bool(y)) = (a, b) else {
                return Err(mismatch());
            };
            Bool(if op == BinOp::And { *x && *y } else { *x || *y })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(v: Value, p: f64) -> Value {
        Value::uncertain(v, p)
    }

    #[test]
    fn confidence_of_plain_and_wrapped() {
        assert_eq!(evaluate_confidence(&Value::Num(42.0)), 1.0);
        assert_eq!(evaluate_confidence(&u(Value::Num(42.0), 0.73)), 0.73);
        assert_eq!(evaluate_confidence(&Value::Null), 1.0);
    }

    #[test]
    fn product_rule() {
        let r = combine_uncertain(BinOp::Add, &u(Value::Num(10.0), 0.8), &u(Value::Num(5.0), 0.5)).unwrap();
        assert_eq!(r.unwrapped(), &Value::Num(15.0));
        assert!((r.score() - 0.40).abs() < 1e-12);
        let half = combine_uncertain(BinOp::Add, &u(Value::Num(10.0), 0.8), &Value::Num(5.0)).unwrap();
        assert_eq!(half.score(), 0.8);
    }

    #[test]
    fn zadeh_min_and_max() {
        let t = |p| u(Value::Bool(true), p);
        let r = combine_uncertain(BinOp::And, &t(0.9), &t(0.5)).unwrap();
        assert_eq!(r.score(), 0.5);
        assert_eq!(r.unwrapped(), &Value::Bool(true));
        assert_eq!(combine_uncertain(BinOp::Or, &t(0.9), &t(0.5)).unwrap().score(), 0.9);
    }

    #[test]
    fn certain_results_unwrap() {
        let r = combine_uncertain(BinOp::Mul, &Value::Num(2.0), &Value::Num(3.0)).unwrap();
        assert_eq!(r, Value::Num(6.0));
    }

    #[test]
    fn errors() {
        let e = combine_uncertain(BinOp::Div, &Value::Num(1.0), &Value::Num(0.0)).unwrap_err();
        assert_eq!(e.message, "division by zero");
        assert_eq!(
            combine_uncertain(BinOp::Add, &Value::str("k="), &Value::identity("s", "oauth")).unwrap_err().kind,
            ErrorKind::CapabilityError
        );
        assert_eq!(
            combine_uncertain(BinOp::And, &Value::Num(1.0), &Value::Bool(true)).unwrap_err().kind,
            ErrorKind::TypeError
        );
    }

    #[test]
    fn string_concat_renders() {
        let r = combine_uncertain(BinOp::Add, &Value::str("n="), &u(Value::Num(3.0), 0.5)).unwrap();
        assert_eq!(r.unwrapped(), &Value::str("n=3"));
        assert_eq!(r.score(), 0.5);
    }

    proptest! {
        #[test]
        fn score_algebra(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, x in -1e6f64..1e6, y in -1e6f64..1e6) {
            let a = u(Value::Num(x), p1);
            let b = u(Value::Num(y), p2);
            prop_assert_eq!(combine_uncertain(BinOp::Add, &a, &b).unwrap().score(), p1 * p2);
            prop_assert_eq!(combine_uncertain(BinOp::Lt, &a, &b).unwrap().score(), p1 * p2);
            let ba = u(Value::Bool(x > 0.0), p1);
            let bb = u(Value::Bool(y > 0.0), p2);
            prop_assert_eq!(combine_uncertain(BinOp::And, &ba, &bb).unwrap().score(), p1.min(p2));
            prop_assert_eq!(combine_uncertain(BinOp::Or, &ba, &bb).unwrap().score(), p1.max(p2));
        }

        #[test]
        fn branch_is_a_function_of_score(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let s = combine_uncertain(BinOp::Add, &u(Value::Num(1.0), p1), &u(Value::Num(2.0), p2)).unwrap();
            let taken = combine_uncertain(BinOp::Lt, &Value::Num(evaluate_confidence(&s)), &Value::Num(t)).unwrap();
            prop_assert_eq!(taken, Value::Bool(p1 * p2 < t));
        }
    }
}
