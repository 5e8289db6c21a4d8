use std::fmt;

/// Boolean predicate tree over `i1` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateExpr {
    True,
    Pred(String),
    Not(Box<GateExpr>),
    And(Vec<GateExpr>),
    Or(Vec<GateExpr>),
}

impl GateExpr {
    pub fn pred(name: impl Into<String>) -> Self {
        GateExpr::Pred(name.into())
    }

    pub fn negate(self) -> Self {
        match self {
            GateExpr::Not(inner) => *inner,
            other => GateExpr::Not(Box::new(other)),
        }
    }

    pub fn is_false(&self) -> bool {
        matches!(self, GateExpr::Not(inner) if **inner == GateExpr::True)
    }

    /// Conjunction with flattening; an empty list is `True`.
    pub fn and(terms: Vec<GateExpr>) -> Self {
        let mut out = Vec::new();
        for t in terms {
            match t {
                GateExpr::True => {}
                GateExpr::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GateExpr::True,
            1 => out.pop().unwrap(),
            _ => GateExpr::And(out),
        }
    }

    /// Disjunction with flattening; `True` absorbs everything.
    /// An empty list yields `!true`.
    pub fn or(terms: Vec<GateExpr>) -> Self {
        let mut out = Vec::new();
        for t in terms {
            match t {
                GateExpr::True => return GateExpr::True,
                GateExpr::Or(inner) => out.extend(inner),
                f if f.is_false() => {}
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GateExpr::True.negate(),
            1 => out.pop().unwrap(),
            _ => GateExpr::Or(out),
        }
    }

    /// Predicate names in first-occurrence order, appended to `out` without
    /// duplicates.
    pub fn collect_preds<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            GateExpr::True => {}
            GateExpr::Pred(p) => {
                if !out.contains(&p.as_str()) {
                    out.push(p);
                }
            }
            GateExpr::Not(inner) => inner.collect_preds(out),
            GateExpr::And(xs) | GateExpr::Or(xs) => xs.iter().for_each(|x| x.collect_preds(out)),
        }
    }

    pub fn preds(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_preds(&mut out);
        out
    }

    pub fn rename(&mut self, f: &mut impl FnMut(&str) -> Option<String>) {
        match self {
            GateExpr::True => {}
            GateExpr::Pred(p) => {
                if let Some(n) = f(p) {
                    *p = n;
                }
            }
            GateExpr::Not(inner) => inner.rename(f),
            GateExpr::And(xs) | GateExpr::Or(xs) => xs.iter_mut().for_each(|x| x.rename(f)),
        }
    }

    /// Left-to-right short-circuit evaluation. `lookup` is only called for
    /// predicates whose value decides the outcome.
    pub fn eval<E>(&self, lookup: &mut impl FnMut(&str) -> Result<bool, E>) -> Result<bool, E> {
        Ok(match self {
            GateExpr::True => true,
            GateExpr::Pred(p) => lookup(p)?,
            GateExpr::Not(inner) => !inner.eval(lookup)?,
            GateExpr::And(xs) => {
                for x in xs {
                    if !x.eval(lookup)? {
                        return Ok(false);
                    }
                }
                true
            }
            GateExpr::Or(xs) => {
                for x in xs {
                    if x.eval(lookup)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// Evaluate under a total assignment.
    pub fn eval_with(&self, assignment: &dyn Fn(&str) -> bool) -> bool {
        self.eval::<()>(&mut |p| Ok(assignment(p))).unwrap_or(false)
    }

    /// Truth-table equivalence over the union of both predicate sets.
    /// Intended for small gates (the table has `2^n` rows).
    pub fn equivalent(&self, other: &GateExpr) -> bool {
        let mut vars = self.preds();
        for p in other.preds() {
            if !vars.contains(&p) {
                vars.push(p);
            }
        }
        assert!(vars.len() <= 20, "truth table too large");
        (0u32..(1 << vars.len())).all(|row| {
            let assign = |p: &str| {
                let i = vars.iter().position(|v| *v == p).unwrap();
                row & (1 << i) != 0
            };
            self.eval_with(&assign) == other.eval_with(&assign)
        })
    }

    /// Apply common-prefix factoring of disjunctions and the absorption
    /// `a | (!a & b) => a | b` until nothing changes. Both rewrites keep the
    /// left-to-right order of literals, so short-circuit evaluation still
    /// only reads predicates that lie on the executed path.
    pub fn simplify(&self) -> GateExpr {
        let mut cur = self.clone();
        loop {
            let next = simplify_once(&cur);
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    fn conjuncts(&self) -> Vec<GateExpr> {
        match self {
            GateExpr::And(xs) => xs.clone(),
            GateExpr::True => vec![],
            other => vec![other.clone()],
        }
    }

    fn is_compound(&self) -> bool {
        matches!(self, GateExpr::And(_) | GateExpr::Or(_))
    }
}

fn simplify_once(g: &GateExpr) -> GateExpr {
    match g {
        GateExpr::True | GateExpr::Pred(_) => g.clone(),
        GateExpr::Not(inner) => simplify_once(inner).negate(),
        GateExpr::And(xs) => GateExpr::and(xs.iter().map(simplify_once).collect()),
        GateExpr::Or(xs) => {
            let terms: Vec<GateExpr> = xs.iter().map(simplify_once).collect();
            let g = GateExpr::or(terms);
            let GateExpr::Or(terms) = g else { return g };
            if let Some(f) = factor_prefix(&terms) {
                return f;
            }
            absorb(terms)
        }
    }
}

/// `(a & b) | (a & c)  =>  a & (b | c)` for the longest common leading run.
fn factor_prefix(terms: &[GateExpr]) -> Option<GateExpr> {
    let lists: Vec<Vec<GateExpr>> = terms.iter().map(GateExpr::conjuncts).collect();
    let shortest = lists.iter().map(Vec::len).min().unwrap_or(0);
    let mut common = 0;
    while common < shortest && lists.iter().all(|l| l[common] == lists[0][common]) {
        common += 1;
    }
    if common == 0 {
        return None;
    }
    let prefix = lists[0][..common].to_vec();
    let rest = lists.iter().map(|l| GateExpr::and(l[common..].to_vec())).collect();
    let mut out = prefix;
    out.push(GateExpr::or(rest));
    Some(GateExpr::and(out))
}

/// `a | (!a & b) => a | b`, where `a` is an earlier disjunct and `!a` the
/// leading conjunct of a later one.
fn absorb(terms: Vec<GateExpr>) -> GateExpr {
    let mut terms = terms;
    for i in 0..terms.len() {
        let neg = terms[i].clone().negate();
        for j in (i + 1)..terms.len() {
            let conj = terms[j].conjuncts();
            if conj.first() == Some(&neg) {
                terms[j] = GateExpr::and(conj[1..].to_vec());
                return GateExpr::or(terms);
            }
        }
    }
    GateExpr::or(terms)
}

impl fmt::Display for GateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, g: &GateExpr) -> fmt::Result {
            if g.is_compound() {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        }
        match self {
            GateExpr::True => f.write_str("true"),
            GateExpr::Pred(p) => write!(f, "%{p}"),
            GateExpr::Not(inner) => {
                f.write_str("!")?;
                child(f, inner)
            }
            GateExpr::And(xs) | GateExpr::Or(xs) => {
                let sep = if matches!(self, GateExpr::And(_)) { " & " } else { " | " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    child(f, x)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: &str) -> GateExpr {
        GateExpr::pred(n)
    }

    #[test]
    fn simplifies_the_two_path_gate() {
        let g = GateExpr::or(vec![
            GateExpr::and(vec![p("p0"), p("p1")]),
            GateExpr::and(vec![p("p0"), p("p1").negate(), p("p2")]),
        ]);
        let s = g.simplify();
        assert_eq!(s, GateExpr::and(vec![p("p0"), GateExpr::or(vec![p("p1"), p("p2")])]));
        assert!(s.equivalent(&g));
        assert_eq!(s.to_string(), "%p0 & (%p1 | %p2)");
    }

    #[test]
    fn complementary_literals_collapse() {
        let g = GateExpr::or(vec![p("a"), p("a").negate()]);
        assert_eq!(g.simplify(), GateExpr::True);
    }

    #[test]
    fn short_circuit_skips_unneeded_predicates() {
        let g = GateExpr::and(vec![p("a"), p("b")]);
        let r: Result<bool, String> =
            g.eval(&mut |v| if v == "a" { Ok(false) } else { Err(v.to_string()) });
        assert_eq!(r, Ok(false));
    }
}
