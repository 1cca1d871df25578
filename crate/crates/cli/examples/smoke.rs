use cracklab_cli::acceptance::*;
fn main() {
    let lab = Lab::new(AcceptanceParams::smoke());
    let runs: Vec<(&str, Box<dyn Fn(&Lab) -> cracklab::Result<CriterionOutcome>>)> = vec![
        ("c1", Box::new(criterion_1)),
        ("c2", Box::new(criterion_2)),
        ("c3", Box::new(criterion_3)),
        ("c4", Box::new(criterion_4)),
        ("c5", Box::new(criterion_5)),
        ("c6", Box::new(criterion_6)),
        ("c7", Box::new(criterion_7)),
        ("c8", Box::new(criterion_8)),
    ];
    for (name, f) in runs {
        match f(&lab) {
            Ok(o) => {
                println!("{}", o.summary_line());
                if !o.pass {
                    for l in &o.lines { println!("    {l}"); }
                }
            }
            Err(e) => println!("{name} ERROR: {e}"),
        }
    }
}
