//! The weighted shift: which eigenvectors live in H_W as r varies.
use num_complex::Complex64;
use ruelle::shift_model::{finite_section_report, ShiftModel};

fn main() -> ruelle::Result<()> {
    let (w0, w1) = (Complex64::new(0.8, 0.0), Complex64::new(0.3, 0.0));
    for r in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        let m = ShiftModel::new(w0, w1, r, (-50, 50))?;
        println!(
            "r = {r:>4}: e^-r = {:.3}, w0 {:?}, w1 {:?}",
            (-r).exp(),
            m.membership_w0(),
            m.membership_w1()
        );
    }
    let m = ShiftModel::new(w0, w1, 1.0, (-50, 50))?;
    let rep = finite_section_report(&m, 80)?;
    println!("finite section (N = 80): isolated eigenvalues {:?}, w0 found: {}", rep.isolated, rep.w0_found);
    Ok(())
}
