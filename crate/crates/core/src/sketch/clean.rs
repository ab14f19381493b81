use crate::raster::Mask;

/// Labels 8-connected components of set pixels. Returns per-pixel labels
/// (`u32::MAX` for background) and the size of each component, with labels
/// assigned in raster order of each component's first pixel.
pub fn connected_components(mask: &Mask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![u32::MAX; w * h];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != u32::MAX {
            continue;
        }
        let label = sizes.len() as u32;
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.data()[j] && labels[j] == u32::MAX {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// 3x3 morphological closing. Dilation ignores pixels outside the image and
/// erosion treats them as set, so the result always contains the input.
pub fn close3x3(mask: &Mask) -> Mask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let sample = |m: &Mask, x: isize, y: isize, outside: bool| {
        if x < 0 || y < 0 || x >= w || y >= h {
            outside
        } else {
            m.get(x as usize, y as usize)
        }
    };
    let mut dilated = Mask::empty(w as usize, h as usize);
    for y in 0..h {
        for x in 0..w {
            let any = (-1..=1).any(|dy| (-1..=1).any(|dx| sample(mask, x + dx, y + dy, false)));
            dilated.set(x as usize, y as usize, any);
        }
    }
    let mut closed = Mask::empty(w as usize, h as usize);
    for y in 0..h {
        for x in 0..w {
            let all = (-1..=1).all(|dy| (-1..=1).all(|dx| sample(&dilated, x + dx, y + dy, true)));
            closed.set(x as usize, y as usize, all);
        }
    }
    closed
}

/// Drops 8-connected components smaller than `min_component`, then closes
/// small gaps with one 3x3 closing.
pub fn clean_sketch(edges: &Mask, min_component: usize) -> Mask {
    close3x3(&remove_small_components(edges, min_component))
}

pub(crate) fn remove_small_components(edges: &Mask, min_component: usize) -> Mask {
    let (labels, sizes) = connected_components(edges);
    let mut kept = edges.clone();
    for (flag, &l) in kept.data_mut().iter_mut().zip(&labels) {
        if l != u32::MAX && sizes[l as usize] < min_component {
            *flag = false;
        }
    }
    kept
}
