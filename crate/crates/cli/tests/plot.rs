use std::fmt::Write;
use std::time::{Duration, Instant};

use dbmc_cli::output::read_error_table;
use dbmc_cli::plot::render_svg;

fn synthetic_csv(nodes: usize, rows: usize) -> String {
    let mut s = String::from("t");
    for i in 1..=nodes {
        write!(s, ",node_{i}").unwrap();
    }
    s.push_str(",vplus,vminus,maxabs_err\n");
    for k in 0..rows {
        let t = k as f64 * 0.01;
        write!(s, "{t:.16e}").unwrap();
        for i in 0..nodes {
            write!(s, ",{:.16e}", (1.0 + i as f64) * (-t).exp()).unwrap();
        }
        s.push_str(",0,0,0\n");
    }
    s
}

#[test]
fn empty_trajectory_is_an_error() {
    assert!(read_error_table("t,node_1,vplus,vminus,maxabs_err\n".as_bytes()).is_err());
    assert!(read_error_table("".as_bytes()).is_err());
}

#[test]
fn malformed_csv_is_an_error() {
    assert!(read_error_table("x,node_1\n0,1\n".as_bytes()).is_err());
    assert!(read_error_table("t,vplus\n0,1\n".as_bytes()).is_err());
    assert!(read_error_table("t,node_1\n0,abc\n".as_bytes()).is_err());
}

#[test]
fn single_node_gives_one_polyline() {
    let table = read_error_table(synthetic_csv(1, 50).as_bytes()).unwrap();
    assert_eq!(render_svg(&table).matches("<polyline").count(), 1);
}

#[test]
fn zero_errors_are_clamped_to_the_floor() {
    let table = read_error_table("t,node_1\n0,1\n1,0\n2,-0.5\n".as_bytes()).unwrap();
    let svg = render_svg(&table);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
}

#[test]
fn output_is_deterministic() {
    let csv = synthetic_csv(5, 400);
    let a = render_svg(&read_error_table(csv.as_bytes()).unwrap());
    let b = render_svg(&read_error_table(csv.as_bytes()).unwrap());
    assert_eq!(a, b);
}

#[test]
fn five_hundred_nodes_render_quickly() {
    let csv = synthetic_csv(500, 2000);
    let start = Instant::now();
    let table = read_error_table(csv.as_bytes()).unwrap();
    let svg = render_svg(&table);
    assert!(start.elapsed() < Duration::from_secs(5), "took {:?}", start.elapsed());
    assert_eq!(svg.matches("<polyline").count(), 500);
}
