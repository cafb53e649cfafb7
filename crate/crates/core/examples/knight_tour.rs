//! Replay the reference knight tour under both coverage policies.

use gridblock::oracle::knight_reference_check;
use gridblock::tasks::Policies;

fn main() {
    for count in [true, false] {
        let policies = Policies {
            knight_intermediates_count: count,
            ..Policies::default()
        };
        let r = knight_reference_check(policies);
        println!(
            "interior cells counted: {count:<5}  covered {:>2}/{}  ends {}  passed {}",
            r.covered_cells,
            r.free_cells,
            r.final_cell,
            r.passed()
        );
        for v in &r.violations {
            println!("    {v}");
        }
    }
}
