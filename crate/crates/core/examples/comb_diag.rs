use afcsim_core::spectrum::*;

fn main() {
    let s = HyperfineScheme::default();
    let classes = s.classes();
    let thermal = SpectralGrid::thermal(56.0, 0.005, 7.0, s.clone()).unwrap();
    let seq = PumpSequence::memory_preparation(&s, &CombSpec::paper_default());
    let g = simulate_pumping(&thermal, &s, &classes, &seq).unwrap();
    let d = &g.optical_depth;
    let n = d.len();
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in d { dmin = dmin.min(v); dmax = dmax.max(v); }
    let thr = dmin + 0.15*(dmax-dmin);
    let mut cands: Vec<(f64,f64)> = vec![];
    for i in 1..n-1 {
        if d[i] >= d[i-1] && d[i] > d[i+1] && d[i] > thr {
            cands.push((g.freq(i), d[i]));
        }
    }
    // replicate prominence filter
    let prom = |idx: usize, c: &Vec<(f64,f64)>| -> f64 {
        let (pos, height) = c[idx];
        let lo = if idx > 0 { c[idx-1].0 } else { g.start_mhz };
        let hi = if idx+1 < c.len() { c[idx+1].0 } else { g.end_mhz() };
        let minb = |a: f64, b: f64| {
            let ia = ((a - g.start_mhz)/g.spacing_mhz).ceil().max(0.0) as usize;
            let ib = (((b - g.start_mhz)/g.spacing_mhz).floor() as usize).min(n-1);
            d[ia..=ib.max(ia)].iter().cloned().fold(f64::INFINITY, f64::min)
        };
        height - minb(lo,pos).max(minb(pos,hi))
    };
    let proms: Vec<f64> = (0..cands.len()).map(|i| prom(i,&cands)).collect();
    let maxp = proms.iter().cloned().fold(0.0,f64::max);
    println!("max prominence {maxp:.3}");
    let kept: Vec<(f64,f64)> = cands.iter().zip(&proms).filter(|(_,&p)| p > 0.25*maxp).map(|(&c,_)| c).collect();
    for (i,(p,h)) in kept.iter().enumerate() { println!("{i:3} kept {p:9.3} h {h:.3}"); }
    match measure_comb(&g) {
        Ok(m) => println!("measured: delta {:.4} d {:.3} d0 {:.3} F {:.2} shape {:?}", m.delta_mhz, m.peak_depth, m.background_depth, m.finesse, m.tooth_shape),
        Err(e) => println!("measure err: {e}"),
    }
}
