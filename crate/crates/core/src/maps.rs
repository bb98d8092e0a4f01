//! The per-pixel output of the detection head.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Channel order of the 7-channel head output.
pub const HEAD_CHANNELS: [&str; 7] = ["text", "center", "x", "y", "h", "w", "theta"];

/// Text map, centre-region map and the five rotated-rectangle regression
/// channels, all `[H, W]` at map scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMaps {
    pub text: Grid,
    pub center: Grid,
    pub x: Grid,
    pub y: Grid,
    pub h: Grid,
    pub w: Grid,
    pub theta: Grid,
}

impl GeometryMaps {
    pub fn zeros(height: usize, width: usize) -> Self {
        let z = Grid::zeros(&[height, width]);
        Self {
            text: z.clone(),
            center: z.clone(),
            x: z.clone(),
            y: z.clone(),
            h: z.clone(),
            w: z.clone(),
            theta: z,
        }
    }

    pub fn channels(&self) -> [&Grid; 7] {
        [
            &self.text,
            &self.center,
            &self.x,
            &self.y,
            &self.h,
            &self.w,
            &self.theta,
        ]
    }

    /// `(height, width)`, after checking every channel agrees.
    pub fn dims(&self) -> Result<(usize, usize)> {
        let (h, w) = self.text.dims2("GeometryMaps")?;
        for (name, g) in HEAD_CHANNELS.iter().zip(self.channels()) {
            if g.shape() != [h, w] {
                return Err(Error::shape(
                    "GeometryMaps",
                    format!(
                        "channel `{name}` is {:?}, text map is [{h}, {w}]",
                        g.shape()
                    ),
                ));
            }
        }
        Ok((h, w))
    }

    /// Splits batch element `b` of a `[B, 7, H, W]` head output.
    pub fn from_head(head: &Grid, b: usize) -> Result<Self> {
        let (_, c, _, _) = head.dims4("GeometryMaps::from_head")?;
        if c != 7 {
            return Err(Error::shape(
                "GeometryMaps::from_head",
                format!("head has {c} channels, expected 7"),
            ));
        }
        Ok(Self {
            text: head.plane(b, 0)?,
            center: head.plane(b, 1)?,
            x: head.plane(b, 2)?,
            y: head.plane(b, 3)?,
            h: head.plane(b, 4)?,
            w: head.plane(b, 5)?,
            theta: head.plane(b, 6)?,
        })
    }

    /// Named sections in [`HEAD_CHANNELS`] order, for map files.
    pub fn to_sections(&self) -> Vec<(String, Grid)> {
        HEAD_CHANNELS
            .iter()
            .zip(self.channels())
            .map(|(n, g)| (n.to_string(), g.clone()))
            .collect()
    }

    /// Inverse of [`to_sections`](Self::to_sections). Every channel must be
    /// present; `w` may be absent (filled with zeros) since shaping uses a
    /// fixed component width.
    pub fn from_sections(sections: &[(String, Grid)]) -> Result<Self> {
        let find = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, g)| g.clone())
        };
        let need = |name: &str| {
            find(name).ok_or_else(|| Error::MapFormat(format!("missing section `{name}`")))
        };
        let text = need("text")?;
        let maps = Self {
            center: need("center")?,
            x: need("x")?,
            y: need("y")?,
            h: need("h")?,
            w: find("w").unwrap_or_else(|| Grid::zeros(text.shape())),
            theta: need("theta")?,
            text,
        };
        maps.dims()?;
        Ok(maps)
    }
}
