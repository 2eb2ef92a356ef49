import os
import sys
import logging

import numpy as np
import yaml

from . import LABEL_NAMES
from .errors import ConfigError, InvalidCorpus, DimensionMismatch, SingularHessian
from .utils import content_hash, require_artifact, save_table, read_table, save_json, read_json

__all__ = ["RunConfig", "Results", "MotifCrfTask", "STAGES", "PIPELINE"]

STAGES = ['ingest', 'segment', 'label', 'features', 'graph', 'fit', 'infer', 'clrtest',
          'simulate', 'report', 'all']
PIPELINE = ['ingest', 'segment', 'label', 'features', 'graph', 'fit', 'infer', 'clrtest', 'report']
CORPUS_FILES = ['notes.csv', 'harmony.csv', 'motifs.csv', 'movements.csv']
_CORPUS = [os.path.join('corpus', name) for name in CORPUS_FILES]
_DATASET = ['features.csv', 'design_meta.json', 'labels.csv', 'graph.json']
STAGE_INPUTS = {
    'segment': _CORPUS,
    'label': _CORPUS + ['segments.csv'],
    'features': _CORPUS + ['segments.csv'],
    'graph': ['segments.csv'],
    'fit': _DATASET,
    'infer': _DATASET + ['params.json'],
    'clrtest': _DATASET,
    'simulate': [],
    'report': ['labels.csv', os.path.join('corpus', 'movements.csv'), 'clr_tests.csv',
               'unary_effects.csv', 'pairwise_effects.csv', 'ess.csv'],
}

DEFAULTS = {
    # graph
    'sigma': 1.0,
    'prune_threshold': 1e-5,
    'normalize_adjacency': True,
    # fit
    'lambda_alpha': 1e-3,
    'lambda_beta': 1e-3,
    'lbfgs_memory': 10,
    'max_iter': 500,
    'gtol': 1e-6,
    # permutation tests
    'B': 1000,
    'seed': 0,
    'warm_start': False,
    'n_jobs': 1,
    # segmentation
    'min_span_measures': 8,
    'proximity_measures': 1.0,
    'use_cadential': True,
    'silence_min_qn': 1.0,
    # labels
    'leap_threshold': 5,
    'contour_mode': 'strict',
    'w_pitch': 1.0,
    'w_beat': 0.5,
    'w_duration': 0.5,
    'gap_penalty': 4.0,
    'pitch_tolerance': 0,
    'align_transposed': True,
    'rhythm_rtol': 1e-3,
    'identity_rtol': 1e-6,
    # features
    'metrical_weights': [3, 2, 1],
    'accentuation_sd': False,
    # inference
    'level': 0.95,
    'wald_reference': 'normal',
    'per_instance_scores': False,
    'ess_moderate': 50,
    'ess_low': 30,
    'fdr_level': 0.05,
    # simulation
    'sim_segments': 300,
    'sim_instances': 8,
    'sim_labels': 3,
    'sim_features': 3,
    'burn_in': 200,
    'thinning': 5,
    # corpus
    'period': None,
}

_POSITIVE = ['sigma', 'lambda_alpha', 'lambda_beta', 'lbfgs_memory', 'max_iter', 'gtol', 'B',
             'min_span_measures', 'proximity_measures', 'silence_min_qn', 'leap_threshold',
             'gap_penalty', 'rhythm_rtol', 'identity_rtol', 'n_jobs', 'ess_moderate', 'ess_low',
             'sim_instances', 'sim_labels', 'sim_features']
_NONNEGATIVE = ['prune_threshold', 'w_pitch', 'w_beat', 'w_duration', 'pitch_tolerance',
                'sim_segments', 'burn_in', 'thinning', 'seed']
_CHOICES = {'contour_mode': ('strict', 'loose'), 'wald_reference': ('normal', 't')}


def _yaml_number(value):
    # YAML 1.1 reads 1e-3 (no dot) as a string
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


class RunConfig(object):
    """
    Run configuration. Attributes are set from a mapping; ``complete_config()``
    fills absent keys with defaults.
    """
    def __init__(self, d=None):
        d = dict(d or {})
        unknown = sorted(set(d) - set(DEFAULTS))
        if unknown:
            raise ConfigError('Unknown configuration keys: {}'.format(', '.join(unknown)))
        for a, b in d.items():
            setattr(self, a, b)

    @classmethod
    def from_file(cls, path):
        """
        Read a YAML mapping (``.yaml``/``.yml``) or flat ``key=value`` lines, each value
        typed by YAML (``1e-3`` is a float, ``true`` a bool). ``#`` starts a comment.
        """
        if not os.path.isfile(path):
            raise ConfigError('Config file "{}" not found'.format(path))
        with open(path, 'r') as f:
            text = f.read()
        try:
            if path.endswith(('.yaml', '.yml')):
                d = yaml.safe_load(text) or {}
                if not isinstance(d, dict):
                    raise ConfigError('Config file "{}" is not a mapping'.format(path))
            else:
                d = {}
                for lineno, line in enumerate(text.splitlines(), 1):
                    line = line.split('#', 1)[0].strip()
                    if not line:
                        continue
                    if '=' not in line:
                        raise ConfigError('{}:{}: expected key=value'.format(path, lineno))
                    key, value = (s.strip() for s in line.split('=', 1))
                    d[key] = yaml.safe_load(value) if value else None
        except yaml.YAMLError as err:
            raise ConfigError('Cannot parse config "{}": {}'.format(path, err))
        return cls({key: _yaml_number(value) for key, value in d.items()})

    def complete_config(self):
        """
        Fill vacant parameters with default values and check them.

        Returns:
            config (``RunConfig``)
        """
        for name, value in DEFAULTS.items():
            if name not in self.__dict__:
                setattr(self, name, list(value) if isinstance(value, list) else value)
        self.validate()
        return self

    def validate(self):
        for name in _POSITIVE:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError('{} must be a positive number, got {!r}'.format(name, value))
        for name in _NONNEGATIVE:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ConfigError('{} must be a nonnegative number, got {!r}'.format(name, value))
        for name, choices in _CHOICES.items():
            if getattr(self, name) not in choices:
                raise ConfigError('{} must be one of {}'.format(name, ', '.join(choices)))
        for name in ('level', 'fdr_level'):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError('{} must be in (0, 1)'.format(name))
        if len(self.metrical_weights) != 3:
            raise ConfigError('metrical_weights needs three values')
        if self.sim_labels > len(LABEL_NAMES):
            raise ConfigError('sim_labels must be at most {}'.format(len(LABEL_NAMES)))
        for name in ('B', 'seed', 'lbfgs_memory', 'max_iter', 'n_jobs', 'sim_segments',
                     'sim_instances', 'sim_labels', 'sim_features', 'burn_in', 'thinning'):
            if int(getattr(self, name)) != getattr(self, name):
                raise ConfigError('{} must be an integer'.format(name))

    def as_dict(self):
        return {name: getattr(self, name) for name in sorted(DEFAULTS)}

    def fit_kwargs(self):
        return dict(lambda_alpha=self.lambda_alpha, lambda_beta=self.lambda_beta,
                    lbfgs_memory=int(self.lbfgs_memory), max_iter=int(self.max_iter),
                    gtol=self.gtol)


class Results():
    """
    Results class. Other attributes will be added by ``setattr()``.
    """
    def __init__(self, config):
        self.config = config


class MotifCrfTask():
    '''
    Pipeline task: runs the stages on an input directory and writes every artifact
    into the output directory.
    '''
    def __init__(self, config, in_dir='.', out_dir='.'):
        """
        Initialize ``MotifCrfTask`` class.

        Parameters:
            config (``RunConfig``, dict or str): configuration, or the path of a config file.
            in_dir (str): directory of the raw CSV files, or ``'toy'`` for the bundled toy corpus.
            out_dir (str): directory of the artifacts.
        """
        if isinstance(config, str):
            config = RunConfig.from_file(config)
        elif not isinstance(config, RunConfig):
            config = RunConfig(config)
        self.config = config.complete_config()
        self.in_dir = in_dir
        self.out_dir = out_dir
        self.logger = None

    def set_logger(self, output_name='motifcrf', verbose=True):
        """
        Set logger for ``MotifCrfTask``. The logger records the time and each output;
        the log file is saved in the output directory.

        Parameters:
            verbose (bool): If False, the logger will be silent.

        Returns:
            logger (``logging.logger`` object)
        """
        self.verbose = verbose
        if verbose:
            os.makedirs(self.out_dir, exist_ok=True)
            log_filename = os.path.join(self.out_dir, output_name + '.log')
            logging.basicConfig(format='%(asctime)s %(message)s', level=logging.INFO,
                                handlers=[logging.StreamHandler(sys.stdout),
                                          logging.FileHandler(log_filename, mode='w')],
                                force=True)
            self.logger = logging.getLogger(output_name)
        else:
            logger = logging.getLogger('motifcrf.quiet')
            logger.propagate = False
            self.logger = logger
        return self.logger

    ########################### paths ###########################

    def path(self, *names):
        return os.path.join(self.out_dir, *names)

    def corpus_paths(self):
        d = self.path('corpus')
        paths = [os.path.join(d, name) for name in ('notes.csv', 'harmony.csv', 'motifs.csv')]
        manifest = os.path.join(d, 'movements.csv')
        return paths, (manifest if os.path.isfile(manifest) else None)

    def _hash(self, paths):
        return content_hash([p for p in paths if p is not None])

    def _echo(self):
        return self.config.as_dict()

    def stage_input_hash(self, stage):
        """
        Content hash of the inputs of ``stage`` that exist right now. Used for the
        error record of a stage that stopped before writing its artifacts.
        """
        if stage == 'ingest':
            in_dir = self.path('toy_input') if self.in_dir == 'toy' else self.in_dir
            paths = [os.path.join(in_dir, name) for name in CORPUS_FILES]
        else:
            paths = [self.path(name) for name in STAGE_INPUTS.get(stage, [])]
        return content_hash([p for p in paths if os.path.isfile(p)])

    def _load_corpus(self, stage):
        from .score import load_corpus, validate_corpus
        paths, manifest = self.corpus_paths()
        for p in paths:
            require_artifact(p, stage='ingest')
        corpus = load_corpus(*paths, manifest_path=manifest)
        diagnostics = validate_corpus(corpus)
        if diagnostics:
            raise InvalidCorpus(diagnostics)
        return corpus, paths + [manifest]

    def _segmented_corpus(self, stage):
        from .segmentation import load_segments
        from dataclasses import replace
        corpus, inputs = self._load_corpus(stage)
        seg_path = require_artifact(self.path('segments.csv'), stage='segment')
        segments = load_segments(seg_path)
        membership = {(s.movement_id, i): s.segment_id for s in segments
                      for i in s.member_instance_ids}
        motifs = {}
        for movement in corpus:
            motifs[movement.movement_id] = [
                replace(inst, segment_id=membership.get((movement.movement_id, inst.instance_id)))
                for inst in movement.motifs]
        return corpus.with_motifs(motifs), segments, inputs + [seg_path]

    def _dataset(self, stage):
        """ Assemble (InferenceData, design, labels table, input paths) in graph row order. """
        from .features import load_design
        from .alignment import load_labels
        from .graph import load_graph, block_diagonal
        from .inference import InferenceData
        inputs = [self.path('features.csv'), self.path('design_meta.json'),
                  self.path('labels.csv'), self.path('graph.json')]
        feats, design = load_design(inputs[0], inputs[1], stage='features')
        labels, Y = load_labels(inputs[2], stage='label')
        graphs = load_graph(inputs[3], stage='graph')

        key = lambda t, k: (int(t['segment_id'][k]), int(t['instance_id'][k]))
        label_rows = {key(labels, k): k for k in range(len(labels))}
        feat_rows = {key(feats, k): k for k in range(len(feats))}
        order = [(g.segment_id, i) for g in graphs for i in g.instance_ids]
        if set(order) != set(label_rows) or set(order) != set(feat_rows):
            raise DimensionMismatch('features.csv, labels.csv and graph.json list different instances')
        X = design.X[[feat_rows[k] for k in order]]
        Y = Y[[label_rows[k] for k in order]]
        seg = np.array([s for s, _ in order], dtype=int)
        data = InferenceData(X, Y, block_diagonal(graphs), seg, list(design.columns))
        return data, design, labels, inputs

    ########################### stages ###########################

    def stage_ingest(self):
        from .score import load_corpus, validate_corpus, filter_period, save_corpus
        from .simulate import make_toy_corpus
        logger, config = self.logger, self.config
        in_dir = self.in_dir
        if in_dir == 'toy':
            in_dir = self.path('toy_input')
            make_toy_corpus(in_dir, seed=int(config.seed))
            logger.info('Generated toy corpus in "{}"'.format(in_dir))
        paths = [os.path.join(in_dir, name) for name in ('notes.csv', 'harmony.csv', 'motifs.csv')]
        manifest = os.path.join(in_dir, 'movements.csv')
        manifest = manifest if os.path.isfile(manifest) else None
        corpus = load_corpus(*paths, manifest_path=manifest, logger=logger)
        if config.period is not None and manifest is None:
            raise ConfigError('period filter "{}" needs movements.csv in "{}"'.format(
                config.period, in_dir))
        corpus = filter_period(corpus, config.period, logger=logger)
        diagnostics = validate_corpus(corpus)
        if diagnostics:
            raise InvalidCorpus(diagnostics)
        input_hash = self._hash(paths + [manifest])
        save_corpus(corpus, self.path('corpus'), config=self._echo(), input_hash=input_hash)
        summary = {'movements': len(corpus),
                   'notes': sum(len(m.notes) for m in corpus),
                   'harmony_events': sum(len(m.harmony) for m in corpus),
                   'instances': corpus.n_instances,
                   'period': config.period}
        save_json(summary, self.path('ingest.json'), config=self._echo(), input_hash=input_hash)
        return summary

    def stage_segment(self):
        from .segmentation import segment_corpus, save_segments
        config = self.config
        corpus, inputs = self._load_corpus('segment')
        _, segments, diagnostics = segment_corpus(
            corpus, silence_min_qn=config.silence_min_qn, use_cadential=config.use_cadential,
            min_span_measures=config.min_span_measures,
            proximity_measures=config.proximity_measures, logger=self.logger)
        input_hash = self._hash(inputs)
        save_segments(segments, self.path('segments.csv'), config=self._echo(), input_hash=input_hash)
        save_json({'n_segments': len(segments),
                   'diagnostics': [{'movement_id': d.movement_id, 'entity': d.entity, 'rule': d.rule}
                                   for d in diagnostics]},
                  self.path('segment_diagnostics.json'), config=self._echo(), input_hash=input_hash)
        return segments

    def stage_label(self):
        from .alignment import select_anchors, label_corpus, save_labels
        config = self.config
        corpus, _, inputs = self._segmented_corpus('label')
        corpus = select_anchors(corpus, logger=self.logger)
        table = label_corpus(corpus, leap_threshold=config.leap_threshold,
                             contour_mode=config.contour_mode, rhythm_rtol=config.rhythm_rtol,
                             identity_rtol=config.identity_rtol, w_pitch=config.w_pitch,
                             w_beat=config.w_beat, w_duration=config.w_duration,
                             gap_penalty=config.gap_penalty,
                             pitch_tolerance=config.pitch_tolerance,
                             transposed=config.align_transposed, logger=self.logger)
        save_labels(table, self.path('labels.csv'), config=self._echo(),
                    input_hash=self._hash(inputs))
        return table

    def stage_features(self):
        from .features import compute_corpus_features, build_design_matrix, save_features
        config = self.config
        corpus, _, inputs = self._segmented_corpus('features')
        table = compute_corpus_features(corpus, metrical_weights=tuple(config.metrical_weights),
                                        accentuation_sd=config.accentuation_sd, logger=self.logger)
        design = build_design_matrix(table, logger=self.logger)
        save_features(table, design, self.path('features.csv'), self.path('design_meta.json'),
                      config=self._echo(), input_hash=self._hash(inputs))
        return design

    def stage_graph(self):
        from .segmentation import load_segments
        from .graph import build_adjacency, save_graph
        config = self.config
        seg_path = require_artifact(self.path('segments.csv'), stage='segment')
        graphs = build_adjacency(load_segments(seg_path), sigma=config.sigma,
                                 prune_threshold=config.prune_threshold,
                                 normalize=config.normalize_adjacency, logger=self.logger)
        save_graph(graphs, self.path('graph.json'), sigma=config.sigma,
                   prune_threshold=config.prune_threshold, config=self._echo(),
                   input_hash=self._hash([seg_path]))
        return graphs

    def stage_fit(self):
        from .crf import fit_crf
        data, design, _, inputs = self._dataset('fit')
        fit = fit_crf(data.X, data.Y, data.adjacency, structure='full', logger=self.logger,
                      **self.config.fit_kwargs())
        labels = LABEL_NAMES[:data.Y.shape[1]]
        payload = fit.params.to_dict(design.columns, labels)
        payload.update({'structure': fit.structure, 'objective': fit.objective,
                        'loglik': fit.loglik, 'converged': fit.converged,
                        'iterations': fit.iterations, 'grad_norm': fit.grad_norm,
                        'objective_trace': fit.trace, 'theta': fit.theta,
                        'theta_names': fit.layout.names(design.columns, labels),
                        'n_instances': data.X.shape[0], 'n_segments': data.n_segments})
        save_json(payload, self.path('params.json'), config=self._echo(),
                  input_hash=self._hash(inputs))
        return fit

    def _load_fit(self, data, inputs):
        from .crf import CrfProblem, FitResult, CrfParams
        params_path = require_artifact(self.path('params.json'), stage='fit')
        payload = read_json(params_path, stage='fit')
        problem = CrfProblem(data.X, data.Y, data.adjacency, structure=payload['structure'],
                             lambda_alpha=self.config.lambda_alpha,
                             lambda_beta=self.config.lambda_beta)
        theta = np.array(payload['theta'], dtype=float)
        fit = FitResult(problem.layout.unpack(theta), theta, problem.layout, payload['objective'],
                        payload['loglik'], payload['converged'], payload['iterations'],
                        payload['grad_norm'])
        return fit, inputs + [params_path]

    def stage_infer(self):
        from .inference import godambe_covariance, effect_tables, effective_sample_size
        config, logger = self.config, self.logger
        data, design, _, inputs = self._dataset('infer')
        fit, inputs = self._load_fit(data, inputs)
        try:
            cov = godambe_covariance(data, fit, per_instance=config.per_instance_scores,
                                     logger=logger)
            jitter = 0.0
        except SingularHessian as err:
            logger.warning('    - {}; retrying with jitter 1e-8'.format(err))
            jitter = 1e-8
            cov = godambe_covariance(data, fit, per_instance=config.per_instance_scores,
                                     jitter=jitter, logger=logger)
        labels = LABEL_NAMES[:data.Y.shape[1]]
        df = data.n_segments - 1 if config.wald_reference == 't' else None
        unary, pairwise = effect_tables(fit, cov, design.columns, labels, level=config.level,
                                        reference=config.wald_reference, df=df)
        ess = effective_sample_size(data.Y, data.segment_index, moderate=config.ess_moderate,
                                    low=config.ess_low)
        input_hash = self._hash(inputs)
        echo = self._echo()
        save_table(unary, self.path('unary_effects.csv'), config=echo, input_hash=input_hash)
        save_table(pairwise, self.path('pairwise_effects.csv'), config=echo, input_hash=input_hash)
        save_table(ess.to_table(labels), self.path('ess.csv'), config=echo, input_hash=input_hash)
        save_json({'theta_names': fit.layout.names(design.columns, labels),
                   'theta': fit.theta, 'se': cov.se, 'covariance': cov.G,
                   'hessian': cov.H, 'score_outer': cov.J, 'jitter': jitter,
                   'reference': config.wald_reference, 'df': df, 'level': config.level,
                   'clusters': 'instances' if config.per_instance_scores else 'segments',
                   'unary_ess': ess.unary_ess, 'pairwise_ess': ess.pairwise_ess},
                  self.path('inference.json'), config=echo, input_hash=input_hash)
        if logger is not None:
            logger.info('    - {} unary and {} pairwise effects, {} segments'.format(
                len(unary), len(pairwise), ess.unary_ess))
        return unary, pairwise, ess

    def stage_clrtest(self):
        from .inference import clr_permutation_test, Comparison, RNG_SCHEME
        from .report import clr_table
        config = self.config
        data, _, _, inputs = self._dataset('clrtest')
        results = []
        for comparison in Comparison:
            self.logger.info('Permutation test {}'.format(comparison.title))
            results.append(clr_permutation_test(
                data, comparison, B=int(config.B), seed=int(config.seed),
                warm_start=config.warm_start, n_jobs=int(config.n_jobs),
                verbose=getattr(self, 'verbose', False), logger=self.logger,
                **config.fit_kwargs()))
        input_hash = self._hash(inputs)
        save_table(clr_table(results), self.path('clr_tests.csv'), config=self._echo(),
                   input_hash=input_hash)
        save_json({'rng_scheme': RNG_SCHEME,
                   'tests': [{'comparison': r.comparison.title, 'observed_clr': r.observed_clr,
                              'permuted_clrs': r.permuted_clrs, 'p_perm': r.p_perm, 'B': r.B,
                              'n_failed': r.n_failed, 'n_unconverged': r.n_unconverged}
                             for r in results]},
                  self.path('clr.json'), config=self._echo(), input_hash=input_hash)
        return results

    def stage_simulate(self):
        from .simulate import SimConfig, synthesize_corpus, write_simulation
        config = self.config
        sim = SimConfig(n_segments=int(config.sim_segments),
                        instances_per_segment=int(config.sim_instances),
                        Q=int(config.sim_labels), p=int(config.sim_features),
                        burn_in=int(config.burn_in), thinning=int(config.thinning),
                        seed=int(config.seed), sigma=config.sigma,
                        prune_threshold=config.prune_threshold)
        os.makedirs(self.out_dir, exist_ok=True)
        result = synthesize_corpus(sim, verbose=getattr(self, 'verbose', False),
                                   logger=self.logger)
        # no input files: the hash of the empty set
        write_simulation(result, self.out_dir, config=self._echo(), input_hash=self._hash([]))
        return result

    def stage_report(self):
        from .alignment import load_labels
        from .score import load_manifest
        from .report import prevalence_report, corpus_overview, render_report
        config = self.config
        labels_path = self.path('labels.csv')
        labels, Y = load_labels(labels_path, stage='label')
        inputs = [labels_path]
        _, manifest = self.corpus_paths()
        periods = load_manifest(manifest) if manifest is not None else {}
        if manifest is not None:
            inputs.append(manifest)

        def optional(name, str_columns):
            p = self.path(name)
            if not os.path.isfile(p):
                self.logger.info('    - {} not found, section skipped'.format(name))
                return None
            inputs.append(p)
            return read_table(p, str_columns=str_columns)

        clr = optional('clr_tests.csv', ['comparison', 'null', 'alternative'])
        if clr is not None:
            clr['p_perm'].format = '.4f'
            clr['clr'].format = '.4f'
        unary = optional('unary_effects.csv', ['name', 'feature', 'label', 'family'])
        pairwise = optional('pairwise_effects.csv', ['name', 'label_q', 'label_r', 'family'])
        ess = optional('ess.csv', ['kind', 'label_q', 'label_r', 'flag'])

        prevalence = prevalence_report(Y)
        overview = corpus_overview(labels, periods)
        input_hash = self._hash(inputs)
        save_table(prevalence, self.path('prevalence.csv'), config=self._echo(), input_hash=input_hash)
        save_table(overview, self.path('overview.csv'), config=self._echo(), input_hash=input_hash)
        text = render_report(prevalence, overview, clr, unary, pairwise, ess,
                             fdr_level=config.fdr_level, config=self._echo(),
                             input_hash=input_hash)
        with open(self.path('report.txt'), 'w') as f:
            f.write(text + '\n')
        return text

    ########################### driver ###########################

    def run_stage(self, stage, output_name='motifcrf', verbose=True):
        """
        Run one stage (or ``all``) and write its artifacts.

        Parameters:
            stage (str): one of ``STAGES``.
            output_name (str): prefix of the log file.
            verbose (bool): If True, log to stdout and to a log file.

        Returns:
            results (``Results`` class): the object returned by every stage run.
        """
        if stage not in STAGES:
            raise ConfigError('Unknown stage "{}"; choose from {}'.format(stage, ', '.join(STAGES)))
        if self.logger is None:
            self.set_logger(output_name=output_name, verbose=verbose)
        os.makedirs(self.out_dir, exist_ok=True)
        results = Results(self.config)
        for name in (PIPELINE if stage == 'all' else [stage]):
            self.current_stage = name
            self.logger.info('Stage "{}"'.format(name))
            setattr(results, name, getattr(self, 'stage_' + name)())
        return results
