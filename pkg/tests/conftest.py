import os

import pytest

NOTES_HEADER = 'movement_id,note_id,onset_qn,duration_qn,midi_pitch,measure,beat,dynamic_level,expressive_marks'
HARMONY_HEADER = 'movement_id,onset_qn,local_key,function_zone,is_secondary,complexity'
MOTIFS_HEADER = 'movement_id,motif_class_id,instance_id,note_ids'


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow statistical checks')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: slow statistical check, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def write_lines(path, header, rows):
    with open(path, 'w') as f:
        f.write(header + '\n')
        for row in rows:
            f.write(row + '\n')
    return str(path)


@pytest.fixture
def corpus_files(tmp_path):
    """
    Write notes/harmony/motifs CSV files from row strings and return their paths.
    The default content is a three-note movement with one motif instance.
    """
    def _write(notes=None, harmony=None, motifs=None, directory=None):
        d = directory or tmp_path
        os.makedirs(d, exist_ok=True)
        notes = notes if notes is not None else ['m1,0,0.0,1.0,60,1,1.0,5.2,0',
                                                 'm1,1,1.0,1.0,64,1,2.0,5.2,1',
                                                 'm1,2,2.0,2.0,67,1,3.0,6.6,0']
        harmony = harmony if harmony is not None else ['m1,0.0,C,T,0,1.0']
        motifs = motifs if motifs is not None else ['m1,1,1,0;1;2']
        return (write_lines(os.path.join(d, 'notes.csv'), NOTES_HEADER, notes),
                write_lines(os.path.join(d, 'harmony.csv'), HARMONY_HEADER, harmony),
                write_lines(os.path.join(d, 'motifs.csv'), MOTIFS_HEADER, motifs))
    return _write


@pytest.fixture(scope='session')
def toy_dir(tmp_path_factory):
    from motifcrf.simulate import make_toy_corpus
    d = str(tmp_path_factory.mktemp('toy'))
    make_toy_corpus(d, seed=0)
    return d


@pytest.fixture(scope='session')
def toy_corpus(toy_dir):
    from motifcrf.score import load_corpus
    return load_corpus(*(os.path.join(toy_dir, name) for name in
                         ('notes.csv', 'harmony.csv', 'motifs.csv')),
                       manifest_path=os.path.join(toy_dir, 'movements.csv'))
