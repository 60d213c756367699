use super::{Expr, Func, Node};

/// Unsimplified derivative of `e` with respect to the symbol `v`.
pub(super) fn derivative(e: &Expr, v: &str) -> Expr {
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(n) | Node::Param(n) => {
            if n == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(terms) => Expr::sum(terms.iter().map(|t| derivative(t, v)).collect()),
        Node::Product(factors) => {
            let mut terms = Vec::with_capacity(factors.len());
            for i in 0..factors.len() {
                let d = derivative(&factors[i], v);
                if d.is_zero_literal() {
                    continue;
                }
                let mut fs: Vec<Expr> = factors.clone();
                fs[i] = d;
                terms.push(Expr::product(fs));
            }
            Expr::sum(terms)
        }
        Node::Quotient(u, w) => {
            let du = derivative(u, v);
            let dw = derivative(w, v);
            if dw.is_zero_literal() {
                return Expr::quotient(du, w.clone());
            }
            Expr::quotient(
                Expr::product(vec![du, w.clone()]) - Expr::product(vec![u.clone(), dw]),
                Expr::pow(w.clone(), 2),
            )
        }
        Node::Power(b, k) => {
            let db = derivative(b, v);
            if *k == 0 || db.is_zero_literal() {
                return Expr::zero();
            }
            Expr::product(vec![Expr::int(i64::from(*k)), Expr::pow(b.clone(), k - 1), db])
        }
        Node::Neg(inner) => Expr::neg(derivative(inner, v)),
        Node::Func(f, a) => {
            let da = derivative(a, v);
            if da.is_zero_literal() {
                return Expr::zero();
            }
            let outer = match f {
                Func::Sin => Expr::func(Func::Cos, a.clone()),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, a.clone())),
                Func::Exp => e.clone(),
                Func::Log => Expr::quotient(Expr::one(), a.clone()),
                Func::Sqrt => Expr::quotient(Expr::one(), Expr::product(vec![Expr::int(2), e.clone()])),
            };
            Expr::product(vec![outer, da])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Symbols};
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s, &Symbols::planar(["lambda", "delta"])).unwrap()
    }

    #[test]
    fn van_der_pol_contact_function() {
        assert_eq!(p("y - x^2/2 - x^3/3").differentiate("x"), p("-x - x^2").simplify());
    }

    #[test]
    fn linear_case() {
        assert_eq!(p("delta - y").differentiate("y"), Expr::int(-1));
    }

    #[test]
    fn product_rule_expands() {
        assert_eq!(p("(1+2*x)*(x-lambda)").differentiate("x"), p("4*x + 1 - 2*lambda").simplify());
    }

    #[test]
    fn quotient_rule_cancels() {
        // d/dx of -(1+4x)/(1+2x) is -2/(1+2x)^2
        assert_eq!(p("-(1+4*x)/(1+2*x)").differentiate("x"), p("-2/(1+2*x)^2").simplify());
    }

    #[test]
    fn elementary_functions() {
        assert_eq!(p("sin(x^2)").differentiate("x"), p("2*x*cos(x^2)").simplify());
        assert_eq!(p("exp(2*y)").differentiate("y"), p("2*exp(2*y)").simplify());
        assert_eq!(p("log(x)").differentiate("x"), p("1/x").simplify());
        assert_eq!(p("sqrt(x)").differentiate("x"), p("1/(2*sqrt(x))").simplify());
        assert_eq!(p("cos(x)").differentiate("x"), p("-sin(x)").simplify());
    }

    #[test]
    fn parameters_are_constants_for_chart_derivatives() {
        assert_eq!(p("lambda*delta").differentiate("x"), Expr::zero());
        assert_eq!(p("lambda*x").differentiate("lambda"), p("x"));
    }
}
