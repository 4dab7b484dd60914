//! Label maps as binary PPM images.

use gpm_core::energy::Labeling;
use gpm_core::instance::Instance;

use crate::CliError;

/// Background is black; joint labels cycle through a fixed palette.
pub fn label_color(label: usize, background: usize) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 10] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 190],
    ];
    if label == background {
        [0, 0, 0]
    } else {
        PALETTE[label % PALETTE.len()]
    }
}

/// One video frame, each voxel colored by its segment's label.
pub fn render_frame(inst: &Instance, labeling: &Labeling, frame: usize) -> Result<Vec<u8>, CliError> {
    let grid = inst
        .graph
        .grid
        .ok_or_else(|| CliError::Invalid("missing frame metadata: instance has no grid layout".into()))?;
    if frame >= grid.frames {
        return Err(CliError::Invalid(format!(
            "frame {frame} does not exist (video has {} frames)",
            grid.frames
        )));
    }
    if labeling.len() != inst.n_segments() {
        return Err(CliError::Mismatch(format!(
            "labeling has {} segments, instance has {}",
            labeling.len(),
            inst.n_segments()
        )));
    }
    let background = inst.labels.background_label();
    let mut out = format!("P6\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.reserve(grid.width * grid.height * 3);
    for y in 0..grid.height {
        for x in 0..grid.width {
            let label = labeling.0[grid.segment_at(x, y, frame)];
            out.extend_from_slice(&label_color(label, background));
        }
    }
    Ok(out)
}
