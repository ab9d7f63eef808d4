//! Observational equivalence of outcomes: the criterion for "implements
//! the same model".

use serde::Serialize;

use crate::outcome::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquivMode {
    /// Equal status, exact print sequence, and equal final stores.
    Strict,
    /// Equal status and final stores; prints compared as a multiset.
    Confluent,
}

/// Comparison verdict with the first divergences found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivResult {
    pub equal: bool,
    pub mode: EquivMode,
    pub diffs: Vec<String>,
}

impl EquivResult {
    fn diff(&mut self, msg: String) {
        self.equal = false;
        self.diffs.push(msg);
    }
}

/// Compare two outcomes of the same program. Steps are not part of the
/// observable record; the diff report names the first divergence in each
/// component.
pub fn equivalent(a: &Outcome, b: &Outcome, mode: EquivMode) -> EquivResult {
    let mut result = EquivResult {
        equal: true,
        mode,
        diffs: Vec::new(),
    };

    if a.status != b.status {
        result.diff(format!("status: {} vs {}", a.status, b.status));
    }

    match mode {
        EquivMode::Strict => {
            if a.prints != b.prints {
                let first = a
                    .prints
                    .iter()
                    .zip(b.prints.iter())
                    .position(|(x, y)| x != y);
                match first {
                    Some(i) => result.diff(format!(
                        "print #{}: {} vs {}",
                        i, a.prints[i], b.prints[i]
                    )),
                    None => result.diff(format!(
                        "print count: {} vs {}",
                        a.prints.len(),
                        b.prints.len()
                    )),
                }
            }
        }
        EquivMode::Confluent => {
            let mut xs = a.print_strings();
            let mut ys = b.print_strings();
            xs.sort();
            ys.sort();
            if xs != ys {
                result.diff(format!(
                    "print multiset: [{}] vs [{}]",
                    xs.join(", "),
                    ys.join(", ")
                ));
            }
        }
    }

    for (name, av) in &a.globals_final {
        match b.globals_final.get(name) {
            Some(bv) if av == bv => {}
            Some(bv) => result.diff(format!("global @{name}: {av} vs {bv}")),
            None => result.diff(format!("global @{name}: {av} vs absent")),
        }
    }
    for name in b.globals_final.keys() {
        if !a.globals_final.contains_key(name) {
            result.diff(format!("global @{name}: absent vs present"));
        }
    }

    if a.objects_final.len() != b.objects_final.len() {
        result.diff(format!(
            "object count: {} vs {}",
            a.objects_final.len(),
            b.objects_final.len()
        ));
    }
    for (id, ao) in &a.objects_final {
        if let Some(bo) = b.objects_final.get(id) {
            if ao != bo {
                for (field, av) in &ao.fields {
                    match bo.fields.get(field) {
                        Some(bv) if av == bv => {}
                        Some(bv) => {
                            result.diff(format!("obj#{id}.{field}: {av} vs {bv}"))
                        }
                        None => result.diff(format!("obj#{id}.{field}: {av} vs absent")),
                    }
                }
                if ao.type_name != bo.type_name {
                    result.diff(format!(
                        "obj#{id} type: {} vs {}",
                        ao.type_name, bo.type_name
                    ));
                }
            }
        }
    }

    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::stack::run_stack;
    use crate::treewalk::run_inline;
    use crate::validate::validate;

    #[test]
    fn stack_and_inline_are_strict_equivalent() {
        let src = "func f(n) { return n + 1; } \
                   func main() { x = call f(41); print x; }";
        let p = validate(parse(src).unwrap()).unwrap();
        let r = equivalent(
            &run_stack(&p, 100_000),
            &run_inline(&p, 100_000),
            EquivMode::Strict,
        );
        assert!(r.equal, "{:?}", r.diffs);
    }

    #[test]
    fn differing_global_is_named_in_the_diff() {
        let a = validate(parse("global g = 0; func main() { @g = 1; }").unwrap()).unwrap();
        let b = validate(parse("global g = 0; func main() { @g = 2; }").unwrap()).unwrap();
        let r = equivalent(
            &run_stack(&a, 1000),
            &run_stack(&b, 1000),
            EquivMode::Strict,
        );
        assert!(!r.equal);
        assert!(r.diffs.iter().any(|d| d.contains("@g")));
    }

    #[test]
    fn confluent_ignores_print_order_but_not_content() {
        let a = validate(parse("func main() { print 1; print 2; }").unwrap()).unwrap();
        let b = validate(parse("func main() { print 2; print 1; }").unwrap()).unwrap();
        let c = validate(parse("func main() { print 2; print 2; }").unwrap()).unwrap();
        let oa = run_stack(&a, 1000);
        let ob = run_stack(&b, 1000);
        let oc = run_stack(&c, 1000);
        assert!(!equivalent(&oa, &ob, EquivMode::Strict).equal);
        assert!(equivalent(&oa, &ob, EquivMode::Confluent).equal);
        assert!(!equivalent(&oa, &oc, EquivMode::Confluent).equal);
    }
}
