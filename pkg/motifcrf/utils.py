import os
import json
import hashlib

import numpy as np
from astropy.table import Table

from .errors import MissingArtifact

__all__ = ["content_hash", "require_artifact", "save_table", "read_table",
           "save_json", "read_json", "config_comments"]

#########################################################################
########################## Artifact Tools  ##############################
#########################################################################

def content_hash(paths):
    """
    SHA-256 digest over the names and bytes of a set of files.
    The order of ``paths`` does not matter.

    Parameters:
        paths (list of str): files to hash. Missing files raise ``MissingArtifact``.

    Returns:
        digest (str): hex digest, prefixed by ``sha256:``.
    """
    sha = hashlib.sha256()
    for path in sorted(paths, key=lambda p: os.path.basename(p)):
        require_artifact(path)
        sha.update(os.path.basename(path).encode('utf-8'))
        sha.update(b'\0')
        with open(path, 'rb') as f:
            sha.update(f.read())
        sha.update(b'\0')
    return 'sha256:' + sha.hexdigest()


def require_artifact(path, stage=None):
    """ Raise ``MissingArtifact`` unless ``path`` exists. """
    if not os.path.isfile(path):
        raise MissingArtifact(path, stage=stage)
    return path


def config_comments(config=None, input_hash=None):
    """
    Build the ``#`` comment lines embedding the config echo and input hash.

    Parameters:
        config (dict): run configuration, echoed as ``key=value``.
        input_hash (str): content hash of the stage inputs.

    Returns:
        comments (list of str)
    """
    comments = []
    if input_hash is not None:
        comments.append('input_hash={}'.format(input_hash))
    if config is not None:
        for key in sorted(config):
            comments.append('config.{}={}'.format(key, json.dumps(config[key])))
    return comments


def save_table(table, path, config=None, input_hash=None, overwrite=True):
    """
    Save an ``astropy.table.Table`` as comma-separated text with provenance comments.

    Parameters:
        table (``astropy.table.Table``): the table to be saved.
        path (str): output file.
        config (dict): run configuration echoed into the header.
        input_hash (str): content hash of the inputs this table derives from.
        overwrite (bool): whether overwrite the file. Default is True.

    Returns:
        path (str)
    """
    table = Table(table, copy=True)
    table.meta.clear()
    comments = config_comments(config, input_hash)
    if comments:
        table.meta['comments'] = comments
    if os.path.islink(path):
        os.unlink(path)
    table.write(path, format='ascii.csv', overwrite=overwrite)
    return path


def read_table(path, stage=None, str_columns=None):
    """
    Read a comma-separated artifact written by ``save_table`` (or by hand).

    Parameters:
        path (str): file name.
        stage (str): stage producing this file, for the error message.
        str_columns (list of str): columns that must stay strings.

    Returns:
        table (``astropy.table.Table``)
    """
    from astropy.io import ascii
    require_artifact(path, stage=stage)
    converters = {}
    for name in (str_columns or []):
        converters[name] = [ascii.convert_numpy(str)]
    table = Table.read(path, format='ascii.csv', guess=False, converters=converters)
    table.meta.clear()
    return table


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_builtin(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def save_json(payload, path, config=None, input_hash=None):
    """
    Save a mapping as JSON with sorted keys, embedding the config echo and input hash.

    Parameters:
        payload (dict): the content. numpy arrays and scalars are converted;
            non-finite floats are stored as strings (``'inf'``, ``'nan'``).
        path (str): output file.
        config (dict): run configuration.
        input_hash (str): content hash of the inputs.

    Returns:
        path (str)
    """
    payload = dict(payload)
    if config is not None:
        payload['config'] = config
    if input_hash is not None:
        payload['input_hash'] = input_hash
    with open(path, 'w') as f:
        json.dump(_to_builtin(payload), f, indent=1, sort_keys=True)
        f.write('\n')
    return path


def read_json(path, stage=None):
    """ Load a JSON artifact, raising ``MissingArtifact`` if absent. """
    require_artifact(path, stage=stage)
    with open(path, 'r') as f:
        return json.load(f)
