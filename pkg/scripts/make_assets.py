"""Regenerate the bundled target images under assets/.

Sources are the scikit-image sample photographs: center-cropped square,
resized, and written as 8-bit sRGB PNG.  Run from the repository root:

    python3 scripts/make_assets.py
"""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data
from skimage.transform import resize

OUT = Path(__file__).resolve().parent.parent / "assets"

SOURCES = {
    "astronaut_256": (data.astronaut, 256),
    "coffee_96": (data.coffee, 96),
    "chelsea_96": (data.chelsea, 96),
    "camera_96": (data.camera, 96),
    "rocket_96": (data.rocket, 96),
    "ihc_96": (data.immunohistochemistry, 96),
    "coffee_64": (data.coffee, 64),
    "chelsea_64": (data.chelsea, 64),
    "camera_64": (data.camera, 64),
    "rocket_64": (data.rocket, 64),
    "ihc_64": (data.immunohistochemistry, 64),
}


def square_crop(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return img[y0:y0 + side, x0:x0 + side]


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name, (loader, side) in SOURCES.items():
        img = loader()
        if img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        img = square_crop(img)
        img = resize(img, (side, side), anti_aliasing=True)
        u8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
        path = OUT / f"{name}.png"
        Image.fromarray(u8).save(path)
        print(path)


if __name__ == "__main__":
    main()
