import os

import pytest

from reflectbench.dataset import write_manifest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def write_seq_dir(root, name, gt_lines, absent_lines=None, attr_line=None):
    """Write a raw sequence directory from text lines (no parsing round-trip)."""
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "groundtruth.txt"), "w") as f:
        f.write("\n".join(gt_lines) + "\n")
    if absent_lines is not None:
        with open(os.path.join(path, "absent.txt"), "w") as f:
            f.write("\n".join(absent_lines) + "\n")
    if attr_line is not None:
        with open(os.path.join(path, "attributes.txt"), "w") as f:
            f.write(attr_line + "\n")
    return path


@pytest.fixture
def golden_root(tmp_path):
    """Materialize the golden 200-sequence manifest as a dataset root."""
    with open(os.path.join(FIXTURES, "golden_lengths.txt")) as f:
        lengths = [int(ln) for ln in f.read().split()]
    root = tmp_path / "golden"
    names = []
    for i, n in enumerate(lengths):
        name = f"seq{i:03d}"
        write_seq_dir(str(root), name, ["10,10,20,20"] * n)
        names.append(name)
    write_manifest(str(root), names)
    return str(root)
