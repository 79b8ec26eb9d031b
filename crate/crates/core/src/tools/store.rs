use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use image::{DynamicImage, GenericImageView, ImageFormat};

use crate::assets::sha256_hex;
use crate::protocol::ImageObservation;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed PNG store for image observations.
///
/// Files are written under `<root>/images/<sha256>.png` and referenced by that
/// relative path. A store without a root only computes the references.
#[derive(Debug, Clone, Default)]
pub struct ImageStore {
    root: Option<PathBuf>,
}

impl ImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: Some(root.into()) }
    }

    pub fn in_memory() -> Self {
        Self { root: None }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn put(&self, image: &DynamicImage) -> std::io::Result<ImageObservation> {
        let (width, height) = image.dimensions();
        self.put_png(&encode_png(image)?, width, height)
    }

    /// Stores already-encoded PNG bytes of a `width` x `height` image.
    pub fn put_png(&self, bytes: &[u8], width: u32, height: u32) -> std::io::Result<ImageObservation> {
        let sha256 = sha256_hex(bytes);
        let rel = format!("images/{sha256}.png");
        if let Some(root) = &self.root {
            let path = root.join(&rel);
            if !path.exists() {
                let dir = path.parent().expect("images path has a parent");
                fs::create_dir_all(dir)?;
                let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
                let tmp = dir.join(format!(".{sha256}.{}.{n}.tmp", std::process::id()));
                let mut f = fs::File::create(&tmp)?;
                f.write_all(bytes)?;
                f.sync_all()?;
                fs::rename(&tmp, &path)?;
            }
        }
        Ok(ImageObservation { path: rel, sha256, width, height })
    }
}

pub fn encode_png(image: &DynamicImage) -> std::io::Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(std::io::Error::other)?;
    Ok(buf.into_inner())
}
