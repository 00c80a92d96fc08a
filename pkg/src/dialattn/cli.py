"""
Command-line entry point.

    dialattn train --corpus train.jsonl --dev dev.jsonl --out runs/static --attention static
    dialattn generate --checkpoint runs/static/checkpoint.bin --test test.jsonl --out runs/static
    dialattn evaluate --generated runs/static/generated.jsonl --embeddings vectors.txt --out runs/static
    dialattn analyze --generated a.jsonl b.jsonl --names static dynamic --stoplist stop.txt --out runs
    dialattn gradcheck --attention learnable
    dialattn --from-echo runs/static/run_config.json

Every command writes `run_config.json` beside its outputs; replaying that
file with --from-echo reproduces the run.
"""

import argparse
import json
import logging
import pathlib
import sys
from collections import Counter
from collections.abc import Callable
from dataclasses import asdict, dataclass, field, fields

from .config import ModelConfig, TrainConfig, config_digest
from .corpus import GenerationRecord, build_vocab, load_embeddings, load_generations
from .corpus import load_sessions, load_stop_words, prepare_session, write_generations
from .enums import AttentionMode, Direction, ExitCode, TokenLevel
from .exceptions import ArchitectureMismatchError, CheckpointError, DialogueError, NumericError
from .exceptions import ParseError, UsageError, ValidationError
from .gradcheck import gradcheck_model, run_suite, suite_configs
from .metrics import collocation_rate, evaluate, frequency_table, token_frequency
from .tensor import GRADIENT_RULES, override_gradient_rule
from .trainer import load_checkpoint, model_from_checkpoint, save_checkpoint, train, write_loss_history

logger = logging.getLogger(__name__)

ECHO_FILE = 'run_config.json'
MODEL_FIELDS = tuple(f.name for f in fields(ModelConfig))
TRAIN_FIELDS = tuple(f.name for f in fields(TrainConfig))

# gradient checks run at synthetic desk dimensions unless overridden
GRADCHECK_DIMS = {'embedding_dim': 8, 'hidden_size': 12, 'pad_len': 6, 'heads': 1}


@dataclass
class RunConfig:
    """
    One reproducible command invocation.

    Attributes
        command: train, generate, evaluate, analyze or gradcheck
        corpus, dev, test: Session files
        embeddings: Word-vector file for evaluation
        checkpoint: Checkpoint to resume from (train) or decode with (generate)
        out: Output directory
        generated: Generated-output files (evaluate reads the first)
        names: Column labels for analyze
        stoplist: Stop-word file
        model_overrides: ModelConfig fields set on the command line
        train_overrides: TrainConfig fields set on the command line
        max_len: Generation length cap (default pad_len)
        last_utterance: Collocations from the last context utterance only
        suite: Run the full gradient-check suite
        sample: Elements checked per tensor in gradient checks (None: all)
        corrupt_rule: Primitive whose gradient rule is deliberately broken
    """

    command: str
    corpus: str | None = None
    dev: str | None = None
    test: str | None = None
    embeddings: str | None = None
    checkpoint: str | None = None
    out: str | None = None
    generated: list[str] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    stoplist: str | None = None
    model_overrides: dict = field(default_factory=dict)
    train_overrides: dict = field(default_factory=dict)
    max_len: int | None = None
    last_utterance: bool = False
    suite: bool = False
    sample: int | None = None
    corrupt_rule: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f'unknown command {self.command!r}')

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'RunConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f'unknown run config keys: {unknown}')
        if 'command' not in data:
            raise UsageError('run config has no command')
        return cls(**data)

    @classmethod
    def from_echo(cls, path: str) -> 'RunConfig':
        try:
            data = json.loads(pathlib.Path(path).read_text(encoding='utf-8'))
        except FileNotFoundError as e:
            raise UsageError(f'echo file not found: {path}') from e
        except json.JSONDecodeError as e:
            raise ParseError(f'{path}: malformed run config ({e.msg})') from e
        return cls.from_dict(data)

    def write_echo(self, directory: pathlib.Path) -> pathlib.Path:
        path = directory / ECHO_FILE
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + '\n', encoding='utf-8')
        return path

    def model_config(self, base: ModelConfig | None = None) -> ModelConfig:
        """ModelConfig from the reference widths of the chosen mode (or `base`) plus overrides."""
        overrides = dict(self.model_overrides)
        try:
            if base is not None:
                return base.with_overrides(**overrides)
            attention = overrides.pop('attention', AttentionMode.STATIC.value)
            return ModelConfig.reference_defaults(attention, **overrides)
        except (ValidationError, TypeError, ValueError) as e:
            raise UsageError(f'invalid model flags: {e}') from e

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(**self.train_overrides)
        except (ValidationError, TypeError, ValueError) as e:
            raise UsageError(f'invalid training flags: {e}') from e


def _existing(path: str | None, flag: str) -> pathlib.Path:
    if path is None:
        raise UsageError(f'{flag} is required')
    p = pathlib.Path(path)
    if not p.is_file():
        raise UsageError(f'{flag}: no such file {path}')
    return p


def _out_dir(cfg: RunConfig) -> pathlib.Path:
    if cfg.out is None:
        raise UsageError('--out is required')
    out = pathlib.Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(cfg: RunConfig) -> int:
    """Train a model; writes checkpoint.bin (best dev), last.bin, loss histories and vocab.txt."""
    corpus_path = _existing(cfg.corpus, '--corpus')
    dev_path = _existing(cfg.dev, '--dev') if cfg.dev is not None else None
    resume = load_checkpoint(_existing(cfg.checkpoint, '--checkpoint')) if cfg.checkpoint else None
    out = _out_dir(cfg)

    train_config = cfg.train_config()
    if resume is not None:
        model_config = cfg.model_config(resume.model_config)
        if config_digest(model_config) != config_digest(resume.model_config):
            raise ArchitectureMismatchError('flags request a different architecture than the checkpoint')
        vocab = resume.vocab
    else:
        model_config = cfg.model_config()
    sessions = load_sessions(corpus_path, model_config.lowercase)
    if resume is None:
        vocab = build_vocab(sessions, train_config.min_count)
    logger.info('vocabulary: %d tokens', len(vocab))

    def prepare(items):
        return [prepare_session(s, vocab, model_config.pad_len, model_config.max_context) for s in items]

    dev = prepare(load_sessions(dev_path, model_config.lowercase)) if dev_path else None
    result = train(
        prepare(sessions), vocab, model_config, train_config,
        dev=dev, resume=resume, progress=sys.stderr.isatty(),
    )

    save_checkpoint(out / 'checkpoint.bin', result.best)
    save_checkpoint(out / 'last.bin', result.last)
    write_loss_history(out / 'loss_history.tsv', result.loss_history)
    if dev is not None:
        write_loss_history(out / 'dev_loss.tsv', result.dev_history)
    vocab.save(out / 'vocab.txt')
    cfg.write_echo(out)
    logger.info('wrote checkpoints and loss history to %s', out)
    return ExitCode.OK


def cmd_generate(cfg: RunConfig) -> int:
    """Greedy-decode one hypothesis per test session into generated.jsonl."""
    ckpt = load_checkpoint(_existing(cfg.checkpoint, '--checkpoint'))
    test_path = _existing(cfg.test, '--test')
    if cfg.max_len is not None and cfg.max_len < 1:
        raise UsageError(f'--max-len must be >= 1, got {cfg.max_len}')
    out = _out_dir(cfg)

    requested = cfg.model_config(ckpt.model_config)
    if config_digest(requested) != config_digest(ckpt.model_config):
        raise ArchitectureMismatchError(
            f'checkpoint was trained as {ckpt.model_config.to_dict()}, flags request {requested.to_dict()}'
        )
    model = model_from_checkpoint(ckpt)
    vocab = ckpt.vocab
    config = ckpt.model_config

    records = []
    for session in load_sessions(test_path, config.lowercase):
        prepared = prepare_session(session, vocab, config.pad_len, config.max_context)
        ids = model.generate(prepared, cfg.max_len)
        records.append(GenerationRecord(
            context=[' '.join(u) for u in session.context],
            reference=' '.join(session.response),
            hypothesis=' '.join(vocab.decode(ids, strip_special=True)),
        ))
    count = write_generations(out / 'generated.jsonl', records)
    cfg.write_echo(out)
    logger.info('generated %d responses into %s', count, out / 'generated.jsonl')
    return ExitCode.OK


def cmd_evaluate(cfg: RunConfig) -> int:
    """Full metric report (evaluation.txt and evaluation.json)."""
    if not cfg.generated:
        raise UsageError('--generated is required')
    records = load_generations(_existing(cfg.generated[0], '--generated'))
    table = load_embeddings(_existing(cfg.embeddings, '--embeddings'))
    stop_words = load_stop_words(_existing(cfg.stoplist, '--stoplist') if cfg.stoplist else None)
    out = _out_dir(cfg)

    report = evaluate(records, table, stop_words, cfg.last_utterance)
    text = report.to_text()
    (out / 'evaluation.txt').write_text(text, encoding='utf-8')
    (out / 'evaluation.json').write_text(report.to_record() + '\n', encoding='utf-8')
    cfg.write_echo(out)
    sys.stdout.write(text)
    return ExitCode.OK


def analysis_table(
    columns: dict[str, list[GenerationRecord]],
    stop_words: frozenset[str] = frozenset(),
    last_utterance_only: bool = False,
) -> str:
    """
    Side-by-side token frequencies over a shared vocabulary axis, followed by
    each model's collocation rate.

    Rows are ordered by total count across models, then alphabetically.
    """
    names = list(columns)
    freqs = {
        name: token_frequency([r.hypothesis_tokens for r in recs], stop_words)
        for name, recs in columns.items()
    }
    total: Counter = Counter()
    for counts in freqs.values():
        total.update(counts)

    lines = ['token\t' + '\t'.join(names)]
    for token, _ in frequency_table(total):
        lines.append(token + '\t' + '\t'.join(str(freqs[name][token]) for name in names))

    rates = []
    for name in names:
        recs = columns[name]
        if last_utterance_only:
            messages = [r.context_tokens[-1] if r.context else [] for r in recs]
        else:
            messages = [[t for u in r.context_tokens for t in u] for r in recs]
        rate = collocation_rate(
            messages, [r.reference_tokens for r in recs], [r.hypothesis_tokens for r in recs], stop_words
        )
        rates.append(f'{rate:.6f}')
    lines.append('')
    lines.append('collocation_rate\t' + '\t'.join(rates))
    return '\n'.join(lines) + '\n'


def cmd_analyze(cfg: RunConfig) -> int:
    """Token-frequency and collocation comparison across one or more models (analysis.tsv)."""
    if not cfg.generated:
        raise UsageError('--generated needs at least one file')
    names = cfg.names or [pathlib.Path(p).stem for p in cfg.generated]
    if len(names) != len(cfg.generated):
        raise UsageError(f'{len(names)} names for {len(cfg.generated)} generated files')
    if len(set(names)) != len(names):
        raise UsageError(f'column names must be unique: {names}')
    columns = {name: load_generations(_existing(p, '--generated')) for name, p in zip(names, cfg.generated)}
    stop_words = load_stop_words(_existing(cfg.stoplist, '--stoplist') if cfg.stoplist else None)
    out = _out_dir(cfg)

    text = analysis_table(columns, stop_words, cfg.last_utterance)
    (out / 'analysis.tsv').write_text(text, encoding='utf-8')
    cfg.write_echo(out)
    sys.stdout.write(text)
    return ExitCode.OK


def _corrupted(op: str) -> Callable:
    original = GRADIENT_RULES[op]

    def rule(g, node):
        return tuple(None if gi is None else 1.5 * gi for gi in original(g, node))

    return rule


def cmd_gradcheck(cfg: RunConfig) -> int:
    """Finite-difference check of one attention mode, or of the whole suite with --suite."""
    overrides = {**GRADCHECK_DIMS, **cfg.model_overrides}
    try:
        config = ModelConfig(**overrides)
    except (ValidationError, TypeError, ValueError) as e:
        raise UsageError(f'invalid model flags: {e}') from e
    seed = cfg.train_overrides.get('seed', 0)
    if cfg.sample is not None and cfg.sample < 1:
        raise UsageError(f'--sample must be >= 1, got {cfg.sample}')
    if cfg.corrupt_rule is not None and cfg.corrupt_rule not in GRADIENT_RULES:
        raise UsageError(f'unknown primitive {cfg.corrupt_rule!r}; known: {sorted(GRADIENT_RULES)}')

    def run():
        if cfg.suite:
            dims = {
                'embedding_dim': config.embedding_dim,
                'hidden_size': config.hidden_size,
                'pad_len': config.pad_len,
            }
            return run_suite(seed=seed, sample=cfg.sample if cfg.sample is not None else 24,
                             configs=suite_configs(**dims))
        return [gradcheck_model(config, seed=seed, sample=cfg.sample)]

    if cfg.corrupt_rule is not None:
        with override_gradient_rule(cfg.corrupt_rule, _corrupted(cfg.corrupt_rule)):
            reports = run()
    else:
        reports = run()

    text = ''.join(r.to_text() + '\n' for r in reports)
    worst = max(r.max_rel_error for r in reports)
    text += f'max relative error: {worst:.3e}\n'
    if cfg.out is not None:
        out = _out_dir(cfg)
        (out / 'gradcheck.txt').write_text(text, encoding='utf-8')
        cfg.write_echo(out)
    sys.stdout.write(text)
    if not all(r.passed for r in reports):
        logger.error('gradient check failed (max relative error %.3e)', worst)
        return ExitCode.NUMERIC
    return ExitCode.OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    'train': cmd_train,
    'generate': cmd_generate,
    'evaluate': cmd_evaluate,
    'analyze': cmd_analyze,
    'gradcheck': cmd_gradcheck,
}


def _model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('model')
    group.add_argument('--attention', choices=[m.value for m in AttentionMode])
    group.add_argument('--heads', type=int)
    group.add_argument('--direction', choices=[d.value for d in Direction])
    group.add_argument('--token-level', dest='token_level', choices=[t.value for t in TokenLevel])
    group.add_argument('--pad-len', dest='pad_len', type=int)
    group.add_argument('--emb-dim', dest='embedding_dim', type=int)
    group.add_argument('--hidden', dest='hidden_size', type=int)
    group.add_argument('--decoder-hidden', dest='decoder_hidden_size', type=int)
    group.add_argument('--dropout', type=float)
    group.add_argument('--max-context', dest='max_context', type=int,
                       help='keep the last K context utterances')
    group.add_argument('--no-lowercase', dest='lowercase', action='store_false', default=None)


def _train_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('training')
    group.add_argument('--epochs', type=int)
    group.add_argument('--lr', dest='learning_rate', type=float)
    group.add_argument('--batch', dest='batch_size', type=int)
    group.add_argument('--weight-decay', dest='weight_decay', type=float)
    group.add_argument('--min-count', dest='min_count', type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dialattn',
        description='Static, dynamic and hybrid utterance attention for multi-turn dialogue generation.',
    )
    parser.add_argument('--from-echo', dest='from_echo', metavar='PATH',
                        help='replay a run from its run_config.json')
    parser.add_argument('--log-level', dest='log_level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command')

    p = sub.add_parser('train', help='train a model')
    p.add_argument('--corpus')
    p.add_argument('--dev')
    p.add_argument('--checkpoint', help='resume from this checkpoint')
    p.add_argument('--out')
    p.add_argument('--seed', type=int)
    _model_flags(p)
    _train_flags(p)

    p = sub.add_parser('generate', help='greedy-decode a test corpus')
    p.add_argument('--checkpoint')
    p.add_argument('--test')
    p.add_argument('--out')
    p.add_argument('--max-len', dest='max_len', type=int)
    _model_flags(p)

    p = sub.add_parser('evaluate', help='score generated responses')
    p.add_argument('--generated', nargs=1, default=[])
    p.add_argument('--embeddings')
    p.add_argument('--stoplist')
    p.add_argument('--out')
    p.add_argument('--last-utterance', dest='last_utterance', action='store_true')

    p = sub.add_parser('analyze', help='compare token frequencies and collocations across models')
    p.add_argument('--generated', nargs='+', default=[])
    p.add_argument('--names', nargs='+', default=[])
    p.add_argument('--stoplist')
    p.add_argument('--out')
    p.add_argument('--last-utterance', dest='last_utterance', action='store_true')

    p = sub.add_parser('gradcheck', help='finite-difference gradient check')
    p.add_argument('--suite', action='store_true', help='check every attention configuration')
    p.add_argument('--sample', type=int, help='elements checked per tensor')
    p.add_argument('--seed', type=int)
    p.add_argument('--out')
    p.add_argument('--corrupt-rule', dest='corrupt_rule', help=argparse.SUPPRESS)
    _model_flags(p)
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    values = vars(args)
    model = {k: values[k] for k in MODEL_FIELDS if values.get(k) is not None}
    training = {k: values[k] for k in TRAIN_FIELDS if values.get(k) is not None}
    known = {f.name for f in fields(RunConfig)} - {'command', 'model_overrides', 'train_overrides'}
    rest = {k: values[k] for k in known if k in values}
    return RunConfig(command=args.command, model_overrides=model, train_overrides=training, **rest)


def main(argv: list[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format='%(levelname)s %(name)s: %(message)s')
    if args.command is None and args.from_echo is None:
        parser.print_usage(sys.stderr)
        return ExitCode.USAGE

    try:
        cfg = RunConfig.from_echo(args.from_echo) if args.from_echo else run_config_from_args(args)
        return int(COMMANDS[cfg.command](cfg))
    except UsageError as e:
        logger.error('usage: %s', e)
        return ExitCode.USAGE
    except NumericError as e:
        logger.error('numeric failure: %s', e)
        return ExitCode.NUMERIC
    except (ParseError, ValidationError, CheckpointError, OSError, UnicodeDecodeError) as e:
        logger.error('data error: %s', e)
        return ExitCode.DATA
    except DialogueError as e:
        logger.error('%s', e)
        return ExitCode.FAILURE


if __name__ == '__main__':
    sys.exit(main())
