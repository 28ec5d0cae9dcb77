//! Offline slice families of the adaptive cruise controller and the online
//! section at one front-car velocity for each hold length.

use msh::cruise::{offline_families, online_slice, CruiseParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CruiseParams::default();
    let v0 = 25.0;
    let mut sections = Vec::new();
    for m in [1, 5, 10] {
        let fam = offline_families(&p, m)?;
        let s = online_slice(&fam, v0, &p)?;
        let (lo, hi) = s.bounding_box()?.expect("nonempty slice");
        println!(
            "M = {m:2}: {} lower / {} upper slices; at v0 = {v0}: distance ≥ {:.2} m, ego speed ≤ {:.2} m/s",
            fam.lower.len(),
            fam.upper.len(),
            lo[0],
            hi[1]
        );
        sections.push((m, s));
    }
    for pair in sections.windows(2) {
        let ((a, big), (b, small)) = (&pair[0], &pair[1]);
        println!("section for M = {b} inside section for M = {a}: {}", big.contains(small, 1e-6)?);
    }
    Ok(())
}
