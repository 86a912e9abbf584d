import os
from collections.abc import Mapping
from pathlib import Path


def dict_merge(dct, merge_dct):
    """ Recursive dict merge. Inspired by :meth:``dict.update()``, instead of
    updating only top-level keys, dict_merge recurses down into dicts nested
    to an arbitrary depth, updating keys. The ``merge_dct`` is merged into
    ``dct``.
    :param dct: dict onto which the merge is executed
    :param merge_dct: dct merged into dct
    :return: None
    """
    for k, v in merge_dct.items():
        if (k in dct and isinstance(dct[k], dict)
                and isinstance(merge_dct[k], Mapping)):
            dict_merge(dct[k], merge_dct[k])
        else:
            dct[k] = merge_dct[k]


def centered_pad_sizes(shape, size):
    """
    Returns (before, after) pairs that zero-pad the trailing two axes of ``shape`` to ``size`` x ``size``.

    Odd remainders go after the image, so a 3x3 image padded to 4x4 keeps its top-left corner.
    """
    height, width = shape[-2], shape[-1]
    if height > size or width > size:
        raise ValueError("image {0}x{1} does not fit in {2}x{2}".format(height, width, size))
    pads = [(0, 0)] * (len(shape) - 2)
    for extent in (height, width):
        before = (size - extent) // 2
        pads.append((before, size - extent - before))
    return pads


def crop_to(array, height, width):
    """
    Inverse of the centered padding: crops the trailing two axes back to ``height`` x ``width``.
    """
    size_h, size_w = array.shape[-2], array.shape[-1]
    top = (size_h - height) // 2
    left = (size_w - width) // 2
    return array[..., top:top + height, left:left + width]


def atomic_write(path, payload):
    """
    Writes bytes next to ``path`` and moves them into place, so readers never see a partial file
    """
    path = Path(path)
    tmp = path.with_name(path.name + '.part')
    with open(tmp, 'wb') as f:
        f.write(payload)
    os.replace(tmp, path)
