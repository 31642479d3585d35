import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from models.configs import EvalConfig, MockScorerConfig, SyntheticSpec
from models.enums import AnnotationFormat, Benchmark, EvalSetting, NoObjectMode, PromptVariant, ScorerKind
from models.errors import HoikitError
from models.detector import parameter_report
from models.schemas import MatchResult
from services.evaluation import category_pr_curves, evaluate, format_hico_table, format_vcoco_table, write_pr_csv
from services.grounding import partition_and_ground
from services.matching import match_predictions, triplet_as_query
from services.scoring import build_scorer
from tasks.annotations import load_annotations, load_predictions, save_predictions
from tasks.histogram import score_histogram
from tasks.reports import REFERENCE_HICO
from tasks.synthetic import generate_synthetic
from tasks.training_step import predict
from utils.checkpoint import load_checkpoint
from utils.config_file import load_train_config
from utils.logging import print_header
from workflows.ablation import ablate_margin, ablate_prompt, compare_distillation
from workflows.training import load_dataset, train

_values = lambda enum: [e.value for e in enum]


def _print_json(data):
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


def _error_line(error: Exception) -> str:
    """One JSON line describing a failure"""
    payload = {'error': type(error).__name__, 'message': str(error).splitlines()[0] if str(error) else ''}
    for attr in ('path', 'entry', 'status_code', 'dump_path'):
        if getattr(error, attr, None) is not None:
            payload[attr] = getattr(error, attr)
    if isinstance(error, ValidationError):
        payload['details'] = [{'loc': list(e['loc']), 'msg': e['msg']} for e in error.errors()]
    return json.dumps(payload, default=str)


# Subcommands

def cmd_train(args) -> int:
    overrides = {'scorer': args.scorer, 'endpoint': args.endpoint, 'alpha': args.alpha, 'variant': args.variant,
                 'seed': args.seed, 'epochs': args.epochs, 'data': args.data, 'use_itm': args.use_itm}
    cfg = load_train_config(args.config, overrides)
    data, images = load_dataset(cfg)
    print_header(f"hoikit train: {data.name}", {
        "images": f"{len(data.train)} train / {len(data.test)} test",
        "scorer": cfg.scorer.value if cfg.use_itm else "none (detection losses only)",
        "alpha": cfg.alpha, "variant": cfg.variant.value, "seed": cfg.seed, "epochs": cfg.epochs})
    result = train(cfg, data, images=images)
    if result.final_eval is not None:
        print(format_hico_table([result.final_eval]) if result.final_eval.full_map is not None
              else format_vcoco_table(result.final_eval, None))
    _print_json({'checkpoint': result.checkpoint_path, 'run_dir': result.run_dir,
                 'final_eval': result.final_eval.summary() if result.final_eval else None,
                 'scorer_frozen': result.scorer_frozen})
    return 0


def cmd_eval(args) -> int:
    manifest = load_annotations(args.gt, args.gt_format)
    annotations = manifest.test if args.split == 'test' else manifest.train if args.split == 'train' else manifest.all_images
    if args.pred:
        predictions = load_predictions(args.pred)
    else:
        model, _ = load_checkpoint(args.checkpoint)
        predictions = predict(model, annotations)
        if args.save_predictions:
            save_predictions(predictions, args.save_predictions)
    cfg = EvalConfig(benchmark=args.benchmark, setting=args.setting, iou_threshold=args.iou,
                     scenario=args.scenario, no_object_mode=args.no_object_mode)
    result = evaluate(cfg, predictions, annotations, manifest.vocabulary)

    if cfg.benchmark == Benchmark.VCOCO:
        print(format_vcoco_table(result if result.scenario == 1 else None, result if result.scenario == 2 else None,
                                 per_action=args.per_category), file=sys.stderr)
    else:
        reference = {f'{cfg.setting.value} full-scale': REFERENCE_HICO[cfg.setting.value]} \
            if cfg.benchmark == Benchmark.HICO else None
        print(format_hico_table([result], reference), file=sys.stderr)
        if args.pr_csv:
            write_pr_csv(args.pr_csv, category_pr_curves(predictions, annotations, manifest.vocabulary,
                                                         cfg.setting, cfg.iou_threshold))
    if args.out:
        Path(args.out).write_text(result.model_dump_json(indent=2), encoding='utf-8')
    _print_json(result.model_dump())
    return 0


def cmd_ground(args) -> int:
    """Sentences per image: GT triplets as positives, or matched / unmatched stored predictions"""
    manifest = load_annotations(args.annotations, args.format)
    vocab = manifest.vocabulary
    stored = load_predictions(args.predictions) if args.predictions else None
    output = []
    for annotation in manifest.all_images:
        if stored is not None:
            triplets = list(stored.get(annotation.image_id, ()))
            queries = [triplet_as_query(t, vocab.num_objects, vocab.num_verbs) for t in triplets]
            match = match_predictions(queries, annotation.gt_triplets)
        else:
            triplets = list(annotation.gt_triplets)
            match = MatchResult(pairs=tuple((i, i) for i in range(len(triplets))), unmatched=())
        positives, negatives = partition_and_ground(triplets, match, vocab, args.variant)
        sentences = sorted(positives + negatives, key=lambda s: s.source_index)
        output.extend({'image_id': annotation.image_id, 'text': s.text, 'polarity': s.polarity.value,
                       'source_index': s.source_index} for s in sentences)
    print(json.dumps(output, indent=2))
    return 0


def cmd_score(args) -> int:
    manifest = load_annotations(args.annotations, args.format)
    mock = MockScorerConfig(positive_level=args.positive_level, negative_level=args.negative_level,
                            noise_sigma=args.noise_sigma, seed=args.seed)
    scorer = build_scorer(args.scorer, manifest.all_images, manifest.vocabulary, mock, args.endpoint)
    csv_path, png_path = score_histogram(manifest.all_images, manifest.vocabulary, scorer, args.variant,
                                         args.out, args.negative_cap)
    _print_json({'csv': str(csv_path), 'plot': str(png_path)})
    return 0


def cmd_ablate(args) -> int:
    cfg = load_train_config(args.config, {'scorer': args.scorer, 'endpoint': args.endpoint, 'epochs': args.epochs})
    if args.sweep == 'prompt':
        # validated before the dataset is built
        unknown = [v for v in args.variants if v not in _values(PromptVariant)]
        if unknown:
            raise ValueError(f"Unknown prompt variant(s) {unknown}; expected a subset of {_values(PromptVariant)}")
    data, images = load_dataset(cfg)
    if args.sweep == 'margin':
        rows, _ = ablate_margin(cfg, data, args.alphas, images)
    elif args.sweep == 'prompt':
        rows, _ = ablate_prompt(cfg, data, args.variants, images)
    else:
        rows, _ = compare_distillation(cfg, data, args.seeds, images)
    _print_json(rows)
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec.model_validate_json(Path(args.spec).read_text(encoding='utf-8')) if args.spec else SyntheticSpec()
    manifest, _ = generate_synthetic(spec, args.out)
    _print_json({'name': manifest.name, 'train': len(manifest.train), 'test': len(manifest.test),
                 'annotations': str(Path(args.out) / 'annotations.json')})
    return 0


def cmd_params(args) -> int:
    cfg = load_train_config(args.config)
    if cfg.data == 'synthetic':
        spec = cfg.synthetic_spec()
        num_objects, num_verbs = len(spec.object_names), len(spec.verb_names)
    else:
        vocab = load_annotations(cfg.data, cfg.data_format).vocabulary
        num_objects, num_verbs = vocab.num_objects, vocab.num_verbs
    _, table = parameter_report(cfg.detector_config(num_objects, num_verbs))
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hoikit', description='HOI detection with distilled image-text matching')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='Train a detector')
    p.add_argument('--config', help='Flat TOML TrainConfig file')
    p.add_argument('--scorer', choices=_values(ScorerKind))
    p.add_argument('--endpoint', help='Remote ITM service URL')
    p.add_argument('--alpha', type=float, help='Positive margin')
    p.add_argument('--variant', choices=_values(PromptVariant))
    p.add_argument('--seed', type=int)
    p.add_argument('--epochs', type=int)
    p.add_argument('--data', help="'synthetic' or an annotation file")
    p.add_argument('--no-itm', dest='use_itm', action='store_const', const=False, help='Detection losses only')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='Evaluate predictions against ground truth')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--pred', help='Predictions JSON')
    source.add_argument('--checkpoint', help='Detector checkpoint to run on the ground-truth images')
    p.add_argument('--gt', required=True, help='Ground-truth annotation file')
    p.add_argument('--gt-format', default=AnnotationFormat.NATIVE.value, choices=_values(AnnotationFormat))
    p.add_argument('--split', default='all', choices=['train', 'test', 'all'])
    p.add_argument('--benchmark', default=Benchmark.SYNTHETIC.value, choices=_values(Benchmark))
    p.add_argument('--setting', default=EvalSetting.DEFAULT.value, choices=_values(EvalSetting))
    p.add_argument('--scenario', type=int, choices=[1, 2])
    p.add_argument('--no-object-mode', default=NoObjectMode.IGNORE_BOX.value, choices=_values(NoObjectMode))
    p.add_argument('--iou', type=float, default=0.5)
    p.add_argument('--per-category', action='store_true')
    p.add_argument('--pr-csv', help='Write per-category precision / recall curves')
    p.add_argument('--save-predictions', help='With --checkpoint: also write the predictions JSON')
    p.add_argument('--out', help='Write the APResult JSON here as well')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('ground', help='Print grounded sentences as JSON')
    p.add_argument('--annotations', required=True)
    p.add_argument('--format', default=AnnotationFormat.NATIVE.value, choices=_values(AnnotationFormat))
    p.add_argument('--variant', default=PromptVariant.FULL.value, choices=_values(PromptVariant))
    p.add_argument('--predictions', help='Stored predictions to match against the annotations')
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser('score', help='Score positive / negative sentences; write CSV and histogram')
    p.add_argument('--annotations', required=True)
    p.add_argument('--format', default=AnnotationFormat.NATIVE.value, choices=_values(AnnotationFormat))
    p.add_argument('--scorer', default=ScorerKind.MOCK.value, choices=_values(ScorerKind))
    p.add_argument('--endpoint')
    p.add_argument('--variant', default=PromptVariant.FULL.value, choices=_values(PromptVariant))
    p.add_argument('--negative-cap', type=int, default=16)
    p.add_argument('--positive-level', type=float, default=2.0)
    p.add_argument('--negative-level', type=float, default=0.1)
    p.add_argument('--noise-sigma', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default='score_histogram', help='Output prefix (.csv and .png)')
    p.set_defaults(func=cmd_score)

    p = sub.add_parser('ablate', help='Margin / prompt sweeps and the distillation comparison')
    p.add_argument('sweep', choices=['margin', 'prompt', 'distill'])
    p.add_argument('--config')
    p.add_argument('--scorer', choices=_values(ScorerKind))
    p.add_argument('--endpoint')
    p.add_argument('--epochs', type=int)
    p.add_argument('--alphas', type=float, nargs='+', default=[0.0, 1.0, 2.0])
    p.add_argument('--variants', nargs='+', default=['full', 'verb', 'object'])
    p.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('synth', help='Render the synthetic shape-world dataset')
    p.add_argument('--spec', help='SyntheticSpec JSON (defaults when omitted)')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('params', help='Learnable parameters per component')
    p.add_argument('--config')
    p.set_defaults(func=cmd_params)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HoikitError, ValidationError, ValueError, KeyError, OSError) as e:
        print(_error_line(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
