//! Parse a vector field, print it back, and differentiate it symbolically.
//!
//! cargo run --example expressions

use std::collections::BTreeMap;

use perturbed_orbits::expr::{differentiate, parse, Tape, Variable, VectorExpr};

fn main() {
    let src = "-x2 + x1*(1 - x1^2 - x2^2)";
    let e = parse(src).expect("valid expression");
    println!("source:   {src}");
    println!("printed:  {e}");
    let dx1 = differentiate(&e, &Variable::State(0));
    println!("d/dx1:    {dx1}");

    let x = [0.3, -0.7];
    let tape = Tape::compile(&dx1, &BTreeMap::new()).expect("compiles");
    let h = 1e-6;
    let fd = (e.eval(0.0, &[x[0] + h, x[1]], &BTreeMap::new()).unwrap()
        - e.eval(0.0, &[x[0] - h, x[1]], &BTreeMap::new()).unwrap())
        / (2.0 * h);
    println!("at {x:?}: symbolic {:.12}, central difference {fd:.12}", tape.eval(0.0, &x).unwrap());

    let mut params = BTreeMap::new();
    params.insert("lam".to_string(), 0.5);
    let field = VectorExpr::parse(&["x2", "(1 - x1^2)*x2 - x1 + lam*cos(t)"], params).expect("valid field");
    println!("\nJacobian of the forced van der Pol field:");
    for (i, row) in field.jacobian().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!("  row {}: [{}]", i + 1, cells.join(", "));
    }
    println!("divergence: {}", field.divergence());

    match parse("x1 + * 2") {
        Ok(_) => unreachable!(),
        Err(err) => println!("\nerror report: {err}"),
    }
}
