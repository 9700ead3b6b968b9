use eqsat::bench::{default_corpus, run_bench, speedup_report, write_csv};

fn main() {
    let records = run_bench(&default_corpus(), 5).expect("strategies agree");
    write_csv(&records, std::io::stdout()).expect("stdout");
    let report = speedup_report(&records);
    for row in &report.rows {
        println!(
            "{:<28} speedup {:>8.2}x  repairs {} vs {}",
            row.workload, row.speedup, row.immediate_repairs, row.deferred_repairs
        );
    }
    println!(
        "geometric mean {:.2}x, spearman {:.3}",
        report.geometric_mean, report.correlation
    );
}
