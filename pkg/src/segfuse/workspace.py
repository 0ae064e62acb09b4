"""On-disk layout shared by the CLI and the annotation service.

A workspace directory holds::

    manifest.jsonl              image catalog
    images/<image_id>.png       source frames
    predictions/<method>/<id>.png   per-method candidate label maps
    fused/<image_id>/           labels.png, confidence.png, reliable.png, stats.json
    tasks/<task_id>.json        annotation task documents
    rasters/<hash>.png          content-addressed served assets
    finalized/<image_id>/       final labels + instance rasters
"""

from __future__ import annotations

import hashlib
import json
import os

from . import fusion, manifest, raster
from .errors import NotFoundError


class Workspace:
    def __init__(self, root, catalog: raster.ClassCatalog | None = None):
        self.root = os.path.abspath(root)
        self.catalog = catalog or self._load_catalog()

    def _load_catalog(self) -> raster.ClassCatalog:
        path = os.path.join(self.root, "catalog.json")
        if os.path.exists(path):
            with open(path) as f:
                return raster.ClassCatalog.from_json(json.load(f))
        return raster.DEFAULT_CATALOG

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.root, "manifest.jsonl")

    def load_manifest(self) -> list[manifest.ManifestEntry]:
        if not os.path.exists(self.manifest_path):
            raise NotFoundError(f"no manifest at {self.manifest_path}")
        return manifest.load_manifest(self.manifest_path)

    def save_manifest(self, entries: list[manifest.ManifestEntry]) -> None:
        manifest.save_manifest(entries, self.manifest_path)

    def find_entry(self, image_id: str) -> manifest.ManifestEntry:
        for e in self.load_manifest():
            if e.image_id == image_id:
                return e
        raise NotFoundError(f"image {image_id!r} not in manifest")

    def update_entry(self, entry: manifest.ManifestEntry) -> None:
        entries = self.load_manifest()
        for i, e in enumerate(entries):
            if e.image_id == entry.image_id:
                entries[i] = entry
                self.save_manifest(entries)
                return
        raise NotFoundError(f"image {entry.image_id!r} not in manifest")

    def image_path(self, entry: manifest.ManifestEntry) -> str:
        return os.path.join(self.root, entry.image_ref)

    def fused_dir(self, image_id: str) -> str:
        return os.path.join(self.root, "fused", image_id)

    def load_fused(self, image_id: str) -> fusion.FusedResult:
        d = self.fused_dir(image_id)
        if not os.path.isdir(d):
            raise NotFoundError(f"no fused result for image {image_id!r}")
        return fusion.load_fused_result(d, self.catalog)

    def tasks_dir(self) -> str:
        d = os.path.join(self.root, "tasks")
        os.makedirs(d, exist_ok=True)
        return d

    def finalized_dir(self, image_id: str) -> str:
        d = os.path.join(self.root, "finalized", image_id)
        os.makedirs(d, exist_ok=True)
        return d

    # content-addressed asset store for served rasters
    def put_asset(self, data: bytes, suffix: str = ".png") -> str:
        d = os.path.join(self.root, "rasters")
        os.makedirs(d, exist_ok=True)
        ref = hashlib.sha256(data).hexdigest()[:16] + suffix
        path = os.path.join(d, ref)
        if not os.path.exists(path):
            tmp = path + ".tmp"
            with open(tmp, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        return ref

    def asset_path(self, ref: str) -> str:
        if "/" in ref or "\\" in ref or ".." in ref:
            raise NotFoundError(f"bad asset ref {ref!r}")
        path = os.path.join(self.root, "rasters", ref)
        if not os.path.exists(path):
            raise NotFoundError(f"no asset {ref!r}")
        return path
