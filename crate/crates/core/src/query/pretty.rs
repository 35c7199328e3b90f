use std::fmt::Write;

use super::QuerySpec;

/// Canonical source text for a query; parsing it gives back the same spec.
pub fn pretty_print(spec: &QuerySpec) -> String {
    let mut out = String::new();
    for (i, var) in spec.variables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "var {}: attr {} {{", var.name, var.attribute);
        if !var.parents.is_empty() {
            let _ = writeln!(out, "    depends {}", var.parents.join(", "));
        }
        for pref in &var.preferences {
            out.push_str("    ");
            if !pref.conditions.is_empty() {
                let conds: Vec<String> = pref.conditions.iter().map(|(v, x)| format!("{v} = {x}")).collect();
                let _ = write!(out, "when {}: ", conds.join(", "));
            }
            let _ = writeln!(out, "prefer {}", pref.order.join(" > "));
        }
        out.push_str("}\n");
    }
    if let Some(t) = spec.term_count {
        if !spec.variables.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "terms {t}");
    }
    out
}
