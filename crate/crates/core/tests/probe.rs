// temporary probe: cluster structure internals
#[test]
fn probe_cluster_structure() {
    use chemdist_core::soup::*;
    use chemdist_core::geom::Point;
    for attempt in 0..4u64 {
        let mut c = SoupConfig::new(3.0, 555 + attempt).unwrap();
        c.min_duration = 1e-4;
        c.bridge_steps = 32;
        let r = c.domain_radius;
        let loops: Vec<_> = sample_loop_soup(&c).unwrap()
            .into_iter()
            .filter(|lp| lp.vertices().iter().all(|p| p.norm() <= r))
            .collect();
        let clusters = cluster_loops(&loops);
        let mut sizes: Vec<usize> = clusters.iter().map(|cl| cl.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let set = outermost_clusters(&clusters, &loops, 256).unwrap();
        // biggest cluster bbox
        let big = &clusters[clusters.iter().enumerate().max_by_key(|(_, cl)| cl.len()).unwrap().0];
        let mut bb: Option<chemdist_core::geom::Rect> = None;
        for &i in big {
            let b = loops[i].bbox();
            bb = Some(match bb { None => b, Some(x) => chemdist_core::geom::Rect::new(
                Point::new(x.min.x.min(b.min.x), x.min.y.min(b.min.y)),
                Point::new(x.max.x.max(b.max.x), x.max.y.max(b.max.y))) });
        }
        eprintln!(
            "soup {}: loops {}, clusters {}, top sizes {:?}, outermost {}, domain {:?}, biggest bbox side {:.3}",
            attempt, loops.len(), clusters.len(), &sizes[..sizes.len().min(6)],
            set.boundaries.len(), set.domain, bb.unwrap().side()
        );
        for b in set.boundaries.iter().take(6) {
            let c = &b.contour;
            eprintln!("   outermost cluster {} contour bbox {:.3} winds_origin {}", b.cluster, c.bbox().side(), c.contains(Point::new(0.0,0.0)));
        }
    }
}
