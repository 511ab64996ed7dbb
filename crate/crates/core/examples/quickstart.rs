use cavspec::levelshift::LevelShift;
use cavspec::model::{CavitySpec, CouplingDensity};
use cavspec::poles::search_poles;
use cavspec::response::spectrum;

fn main() -> cavspec::Result<()> {
    // Gaussian line of unit width, collective coupling 3, resonant lossy cavity.
    let ls = LevelShift::new(CouplingDensity::gaussian(0.0, 1.0, 3.0, 0.0)?);
    let cavity = CavitySpec::new(0.0, 0.05)?;

    let grid: Vec<f64> = (0..=800).map(|i| -8.0 + 0.02 * i as f64).collect();
    let s = spectrum(&ls, &cavity, &grid)?;
    let (i, peak) = s
        .transmissivity
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &t)| if t > best.1 { (i, t) } else { best });
    println!("transmission peak {peak:.3} at omega = {:.2}", s.grid[i]);

    // Poles no deeper than Im E = -1; the continued Gaussian has infinitely many below.
    for p in search_poles(&ls, &cavity, Some(1.0))? {
        println!("pole {:.4} on the {} sheet", p.location, p.sheet);
    }
    Ok(())
}
