"""Incremental occupancy voxel map with blocky surface extraction.

Depth returns increment per-voxel hit counters inside sparse 16^3 chunks.
A voxel counts as occupied after one hit (the simulated sensor is noise
free), and a chunk's revision bumps only when some voxel actually flips
from free to occupied, so re-integrating an identical scan is a no-op.

Meshing is deliberately simple: one quad per occupied-voxel face whose
neighbor inside the same chunk is free (out-of-chunk neighbors count as
free). That keeps each chunk's mesh a pure function of its own 16^3
occupancy block, so extraction is deterministic and chunks can be
re-meshed and streamed independently.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Set, Tuple

import numpy as np

from .world import DepthImage

CHUNK_EDGE = 16
ChunkCoords = Tuple[int, int, int]


class UnknownChunkError(KeyError):
    """Requested chunk coordinates are not present in the map."""


@dataclass
class MeshChunk:
    """Immutable triangle-mesh fragment for one chunk, world frame."""

    chunk_coords: ChunkCoords
    revision: int
    vertices: np.ndarray   # (v, 3) float32, meters
    normals: np.ndarray    # (v, 3) float32, unit
    triangles: np.ndarray  # (t, 3) uint32 vertex indices

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float32).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float32).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.uint32).reshape(-1, 3)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]


class _Chunk:
    __slots__ = ("counters", "revision")

    def __init__(self):
        self.counters = np.zeros((CHUNK_EDGE,) * 3, dtype=np.uint32)
        self.revision = 0


class VoxelMap:
    """Sparse grid of occupancy-counter chunks keyed by chunk coords."""

    def __init__(self, voxel_size: float = 0.10):
        if voxel_size <= 0.0:
            raise ValueError("voxel_size must be positive")
        self.voxel_size = voxel_size
        self.chunks: Dict[ChunkCoords, _Chunk] = {}

    def chunk_list(self) -> List[Tuple[ChunkCoords, int]]:
        """(coords, revision) pairs, sorted for reproducible output."""
        return sorted((coords, chunk.revision)
                      for coords, chunk in self.chunks.items())

    def occupied_voxel_count(self) -> int:
        return sum(int(np.count_nonzero(c.counters)) for c in self.chunks.values())

    def integrate_points(self, points: np.ndarray) -> Set[ChunkCoords]:
        """Increment hit counters for world points; return dirty chunks."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if points.size == 0:
            return set()
        vox = np.floor(points / self.voxel_size).astype(np.int64)
        chunk_idx = np.floor_divide(vox, CHUNK_EDGE)
        local = vox - chunk_idx * CHUNK_EDGE

        dirty: Set[ChunkCoords] = set()
        keys, inverse = np.unique(chunk_idx, axis=0, return_inverse=True)
        for k, key in enumerate(keys):
            coords = (int(key[0]), int(key[1]), int(key[2]))
            chunk = self.chunks.get(coords)
            if chunk is None:
                chunk = self.chunks.setdefault(coords, _Chunk())
            loc = local[inverse == k]
            cells, counts = np.unique(loc, axis=0, return_counts=True)
            ix, iy, iz = cells[:, 0], cells[:, 1], cells[:, 2]
            before = chunk.counters[ix, iy, iz]
            chunk.counters[ix, iy, iz] = before + counts.astype(np.uint32)
            if np.any(before == 0):
                dirty.add(coords)
        for coords in dirty:
            self.chunks[coords].revision += 1
        return dirty

    def integrate_scan(self, image: DepthImage) -> Set[ChunkCoords]:
        """Fold one depth image into the map; return dirty chunk coords."""
        pose = image.camera_pose
        if not (np.all(np.isfinite(pose.rotation))
                and np.all(np.isfinite(pose.translation))):
            raise ValueError("depth image pose must be finite")
        return self.integrate_points(image.world_points())

    def extract_chunk_mesh(self, coords: ChunkCoords) -> MeshChunk:
        """Blocky surface mesh of one chunk at its current revision.

        Face order is fixed (-x, +x, -y, +y, -z, +z, cells row-major
        within each) and vertices are welded by corner coordinate, so the
        same occupancy always yields bit-identical output.
        """
        coords = (int(coords[0]), int(coords[1]), int(coords[2]))
        chunk = self.chunks.get(coords)
        if chunk is None:
            raise UnknownChunkError(coords)
        occupied = chunk.counters > 0
        base = np.array(coords, dtype=np.int64) * CHUNK_EDGE

        corner_batches: List[np.ndarray] = []  # (n, 4, 3) int corner coords
        normal_batches: List[np.ndarray] = []
        sign_batches: List[int] = []

        for axis in range(3):
            b, c = (axis + 1) % 3, (axis + 2) % 3
            for sign in (-1, 1):
                # Neighbor occupancy shifted against the face direction;
                # out-of-chunk neighbors count as free.
                neighbor = np.zeros_like(occupied)
                src = [slice(None)] * 3
                dst = [slice(None)] * 3
                if sign > 0:
                    src[axis] = slice(1, None)
                    dst[axis] = slice(0, -1)
                else:
                    src[axis] = slice(0, -1)
                    dst[axis] = slice(1, None)
                neighbor[tuple(dst)] = occupied[tuple(src)]
                cells = np.argwhere(occupied & ~neighbor)
                if cells.size == 0:
                    continue
                p00 = cells + base
                if sign > 0:
                    p00 = p00.copy()
                    p00[:, axis] += 1
                eb = np.zeros(3, dtype=np.int64)
                eb[b] = 1
                ec = np.zeros(3, dtype=np.int64)
                ec[c] = 1
                quad = np.stack([p00, p00 + eb, p00 + eb + ec, p00 + ec],
                                axis=1)
                corner_batches.append(quad)
                normal = np.zeros(3)
                normal[axis] = float(sign)
                normal_batches.append(np.broadcast_to(normal,
                                                      (len(cells), 3)))
                sign_batches.append(sign)

        if not corner_batches:
            return MeshChunk(chunk_coords=coords, revision=chunk.revision,
                             vertices=np.zeros((0, 3)),
                             normals=np.zeros((0, 3)),
                             triangles=np.zeros((0, 3)))

        quads = np.concatenate(corner_batches)            # (f, 4, 3)
        face_normals = np.concatenate(normal_batches)     # (f, 3)

        flat = quads.reshape(-1, 3)
        # Corners live on a 17^3 local lattice; encode to one key each so
        # welding is a single unique() over integers.
        local = flat - base
        keys = (local[:, 0] * 17 + local[:, 1]) * 17 + local[:, 2]
        unique_keys, first_idx, inverse = np.unique(
            keys, return_index=True, return_inverse=True)
        vertices = flat[first_idx].astype(np.float64) * self.voxel_size

        normals = np.zeros((len(unique_keys), 3))
        np.add.at(normals, inverse, np.repeat(face_normals, 4, axis=0))
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        # A corner pinched between diagonal voxels can cancel exactly;
        # fall back to +z there.
        degenerate = lengths[:, 0] < 1e-12
        normals[degenerate] = [0.0, 0.0, 1.0]
        lengths[degenerate] = 1.0
        normals = normals / lengths

        quad_ids = inverse.reshape(-1, 4)                 # (f, 4) welded ids
        signs = np.concatenate([
            np.full(len(batch), s, dtype=np.int64)
            for batch, s in zip(corner_batches, sign_batches)])
        i00, i10, i11, i01 = (quad_ids[:, 0], quad_ids[:, 1],
                              quad_ids[:, 2], quad_ids[:, 3])
        pos = signs > 0
        tri_a = np.where(pos[:, None],
                         np.stack([i00, i10, i11], axis=1),
                         np.stack([i00, i01, i11], axis=1))
        tri_b = np.where(pos[:, None],
                         np.stack([i00, i11, i01], axis=1),
                         np.stack([i00, i11, i10], axis=1))
        triangles = np.empty((len(quad_ids) * 2, 3), dtype=np.uint32)
        triangles[0::2] = tri_a
        triangles[1::2] = tri_b

        return MeshChunk(chunk_coords=coords, revision=chunk.revision,
                         vertices=vertices, normals=normals,
                         triangles=triangles)


__all__ = ["VoxelMap", "MeshChunk", "UnknownChunkError", "CHUNK_EDGE",
           "ChunkCoords"]
