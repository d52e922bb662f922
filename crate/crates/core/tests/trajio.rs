use xpcs_core::trajio::{
    generate_brownian, generate_ideal_gas, mean_square_displacement, parse_lammps_dump, parse_xyz, read_cache,
    select_tracers, write_cache, DumpOptions,
};
use xpcs_core::Error;

#[test]
fn xyz_frame_interval_and_count_mismatch() {
    let two = "1\nLattice=\"10 0 0 0 10 0 0 0 10\" time=0\nAr 0 0 0\n\
               1\nLattice=\"10 0 0 0 10 0 0 0 10\" time=43.12\nAr 1 0 0\n";
    let t = parse_xyz(two.as_bytes()).unwrap();
    assert_eq!(t.n_atoms(), 1);
    assert!((t.frame_interval() - 43.12).abs() < 1e-12);

    let short = "2\nLattice=\"10 0 0 0 10 0 0 0 10\" time=0\nAr 0 0 0\nAr 1 1 1\n\
                 1\nLattice=\"10 0 0 0 10 0 0 0 10\" time=1\nAr 0 0 0\n";
    let err = parse_xyz(short.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::AtomCountMismatch { frame: 2, .. }), "{err}");
    assert!(err.to_string().contains("frame 2: atom count mismatch"), "{err}");
}

#[test]
fn scaled_lammps_positions_fill_the_box() {
    let l = 59.19;
    let mut s =
        format!("ITEM: TIMESTEP\n0\nITEM: NUMBER OF ATOMS\n3\nITEM: BOX BOUNDS pp pp pp\n0 {l}\n0 {l}\n0 {l}\n");
    s.push_str("ITEM: ATOMS id type xs ys zs\n1 1 0.0 0.5 0.999\n2 1 0.25 1.0 0.1\n3 1 0.7 0.3 0.2\n");
    let t = parse_lammps_dump(s.as_bytes(), &DumpOptions::default()).unwrap();
    for r in t.frame(0).positions() {
        assert!(r.iter().all(|&x| (0.0..l).contains(&x)), "{r:?}");
    }
    assert!((t.frame(0).positions()[0][1] - 0.5 * l).abs() < 1e-9);
}

#[test]
fn brownian_msd_recovers_generator_rate() {
    let traj = generate_brownian(1000, 30.0, 0.3, 1.0, 500, 4).unwrap();
    let msd = mean_square_displacement(&traj, 50, None).unwrap();
    assert_eq!(msd.msd[0], 0.0);
    assert!(msd.msd.iter().all(|&v| v >= 0.0));
    assert!((msd.diffusivity - 0.3).abs() < 0.02, "D = {}", msd.diffusivity);
    assert!((msd.diffusivity_um2_per_s() - msd.diffusivity * 1e4).abs() < 1e-9);
}

#[test]
fn tracers_and_cache() {
    let traj = generate_brownian(4000, 59.19, 0.3, 0.5, 3, 2).unwrap();
    let t = select_tracers(&traj, 45, 11).unwrap();
    assert_eq!(t.n_atoms(), 45);
    assert_eq!(t.times(), traj.times());
    assert_eq!(select_tracers(&traj, 45, 11).unwrap(), t);
    assert!(select_tracers(&traj, 4001, 0).is_err());

    let gas = generate_ideal_gas(20, 10.0, 4, 9).unwrap();
    let mut buf = Vec::new();
    write_cache(&gas, &mut buf).unwrap();
    let back = read_cache(buf.as_slice()).unwrap();
    for (a, b) in gas.frames().iter().zip(back.frames()) {
        assert_eq!(a.positions(), b.positions());
    }
}
