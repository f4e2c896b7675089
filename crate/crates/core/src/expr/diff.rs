use super::{Expr, Func, Node};

/// Symbolic partial derivative, built with the smart constructors only.
pub(super) fn derivative(e: &Expr, v: &str) -> Expr {
    if !e.contains_var(v) {
        return Expr::zero();
    }
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Var(name) => {
            if &**name == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(items) => Expr::sum(items.iter().map(|x| derivative(x, v))),
        Node::Product(items) => Expr::sum((0..items.len()).map(|i| {
            let d = derivative(&items[i], v);
            if d.is_zero() {
                return d;
            }
            Expr::product(
                items
                    .iter()
                    .enumerate()
                    .map(|(j, x)| if i == j { d.clone() } else { x.clone() }),
            )
        })),
        Node::Neg(x) => Expr::neg(derivative(x, v)),
        Node::Quot(a, b) => {
            let da = derivative(a, v);
            if !b.contains_var(v) {
                return Expr::quot(da, b.clone());
            }
            let db = derivative(b, v);
            Expr::quot(
                Expr::sum([
                    Expr::product([da, b.clone()]),
                    Expr::neg(Expr::product([a.clone(), db])),
                ]),
                Expr::pow(b.clone(), Expr::int(2)),
            )
        }
        Node::Pow(b, k) => {
            let db = derivative(b, v);
            if !k.contains_var(v) {
                // k * b^(k-1) * b'
                return Expr::product([
                    k.clone(),
                    Expr::pow(b.clone(), Expr::sum([k.clone(), Expr::int(-1)])),
                    db,
                ]);
            }
            let dk = derivative(k, v);
            let log_term = Expr::product([dk, Expr::log(b.clone())]);
            if !b.contains_var(v) {
                return Expr::product([e.clone(), log_term]);
            }
            Expr::product([
                e.clone(),
                Expr::sum([log_term, Expr::quot(Expr::product([k.clone(), db]), b.clone())]),
            ])
        }
        Node::Func(f, a) => {
            let da = derivative(a, v);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => return Expr::quot(da, a.clone()),
                Func::Sin => Expr::func(Func::Cos, a.clone()),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, a.clone())),
                Func::Sqrt => {
                    return Expr::quot(da, Expr::product([Expr::int(2), e.clone()]));
                }
            };
            Expr::product([outer, da])
        }
    }
}
