"""
Toy query-based HOI detector.

A patch-embedding transformer encoder feeds three decoder branches (human,
object, interaction) with independent learned queries over the shared memory.
Query i of each branch together forms candidate triplet i.
"""
from dataclasses import dataclass
from typing import List

import numpy as np
import torch
import torch.nn.functional as F
from terminaltables import AsciiTable
from torch import nn, Tensor

from models.configs import ModelConfig
from models.schemas import BBox, HOITriplet, QueryPrediction

BRANCHES = ('human', 'object', 'interaction')
INIT_STD = 0.02  # embeddings: truncated normal, cut at two standard deviations


class MLP(nn.Module):
    """Very simple multi-layer perceptron (also called FFN)"""

    def __init__(self, input_dim, hidden_dim, output_dim, num_layers):
        super().__init__()
        self.num_layers = num_layers
        h = [hidden_dim] * (num_layers - 1)
        self.layers = nn.ModuleList(nn.Linear(n, k) for n, k in zip([input_dim] + h, h + [output_dim]))

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = F.relu(layer(x)) if i < self.num_layers - 1 else layer(x)
        return x


class DecoderBranch(nn.Module):
    """Learned queries plus a transformer decoder stack"""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.queries = nn.Embedding(cfg.num_queries, cfg.embed_dim)
        nn.init.trunc_normal_(self.queries.weight, std=INIT_STD, a=-2 * INIT_STD, b=2 * INIT_STD)
        layer = nn.TransformerDecoderLayer(cfg.embed_dim, cfg.num_heads, cfg.ffn_dim, dropout=0.0, batch_first=True)
        self.decoder = nn.TransformerDecoder(layer, cfg.decoder_layers)

    def forward(self, memory: Tensor) -> Tensor:
        tgt = self.queries.weight.unsqueeze(0).expand(memory.shape[0], -1, -1)
        return self.decoder(tgt, memory)


@dataclass
class DetectorOutput:
    human_boxes: Tensor     # [B, N, 4] center-size, in (0, 1)
    object_boxes: Tensor    # [B, N, 4]
    object_logits: Tensor   # [B, N, K+1]
    verb_logits: Tensor     # [B, N, V]

    batch_size = property(lambda self: self.object_logits.shape[0])

    def probabilities(self, b: int):
        """Detached float64 arrays (object probs, verb probs, human boxes, object boxes) of image b"""
        to_np = lambda t: t[b].detach().double().cpu().numpy()
        return (to_np(self.object_logits.softmax(-1)), to_np(self.verb_logits.sigmoid()),
                to_np(self.human_boxes), to_np(self.object_boxes))

    def query_predictions(self, b: int) -> List[QueryPrediction]:
        obj, verb, hb, ob = self.probabilities(b)
        return [QueryPrediction(BBox(*map(float, hb[q])), BBox(*map(float, ob[q])), obj[q], verb[q])
                for q in range(obj.shape[0])]


class HOIDetector(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        # Seeded init without disturbing the caller's RNG
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(cfg.seed)
            self.patch_embed = nn.Conv2d(3, d, kernel_size=cfg.patch_size, stride=cfg.patch_size)
            self.pos_embed = nn.Parameter(torch.empty(1, cfg.num_patches, d))
            nn.init.trunc_normal_(self.pos_embed, std=INIT_STD, a=-2 * INIT_STD, b=2 * INIT_STD)
            layer = nn.TransformerEncoderLayer(d, cfg.num_heads, cfg.ffn_dim, dropout=0.0, batch_first=True)
            self.encoder = nn.TransformerEncoder(layer, cfg.encoder_layers, enable_nested_tensor=False)
            self.branches = nn.ModuleDict({name: DecoderBranch(cfg) for name in BRANCHES})

            self.human_box_head = MLP(d, d, 4, 3)
            self.object_box_head = MLP(d, d, 4, 3)
            self.object_class_head = nn.Linear(d, cfg.num_objects + 1)
            self.verb_class_head = nn.Linear(d, cfg.num_verbs)
            for head in (self.human_box_head, self.object_box_head):
                nn.init.zeros_(head.layers[-1].weight)
                nn.init.zeros_(head.layers[-1].bias)

    def forward(self, images: Tensor) -> DetectorOutput:
        """images: [B, 3, S, S] floats in [0, 1]"""
        size = self.cfg.image_size
        if images.ndim != 4 or tuple(images.shape[1:]) != (3, size, size):
            raise ValueError(f"Expected images of shape [B, 3, {size}, {size}], got {tuple(images.shape)}")
        tokens = self.patch_embed(images).flatten(2).transpose(1, 2) + self.pos_embed
        memory = self.encoder(tokens)
        human, obj, interaction = (self.branches[name](memory) for name in BRANCHES)
        return DetectorOutput(
            human_boxes=self.human_box_head(human).sigmoid(),
            object_boxes=self.object_box_head(obj).sigmoid(),
            object_logits=self.object_class_head(obj),
            verb_logits=self.verb_class_head(interaction),
        )

    backbone_parameters = lambda self: [p for n, p in self.named_parameters() if n.startswith(('patch_embed', 'pos_embed', 'encoder'))]
    head_parameters = lambda self: [p for n, p in self.named_parameters() if not n.startswith(('patch_embed', 'pos_embed', 'encoder'))]


def decode(output: DetectorOutput, score_threshold: float = 0.0, top_k_verbs: int = 1) -> List[List[HOITriplet]]:
    """
    Per-image triplets: argmax object (no-object queries dropped), the top-k verbs,
    score = p_obj * p_verb, kept when strictly above the threshold, sorted descending.
    """
    results = []
    for b in range(output.batch_size):
        obj, verb, hb, ob = output.probabilities(b)
        no_object = obj.shape[1] - 1
        triplets = []
        for q in range(obj.shape[0]):
            o = int(np.argmax(obj[q]))
            if o == no_object:
                continue
            verbs = np.argsort(-verb[q], kind='stable')[:top_k_verbs]
            h_box, o_box = BBox(*map(float, hb[q])), BBox(*map(float, ob[q]))
            for v in verbs:
                score = float(obj[q, o]) * float(verb[q, v])
                if score > score_threshold:
                    triplets.append(HOITriplet(h_box, o_box, o, int(v), score))
        triplets.sort(key=lambda t: -t.score)
        results.append(triplets)
    return results


def parameter_report(cfg: ModelConfig):
    """(rows, rendered table) of learnable parameters per component"""
    model = HOIDetector(cfg)
    count = lambda module: sum(p.numel() for p in module.parameters() if p.requires_grad)
    d = cfg.embed_dim
    attention_blocks = cfg.encoder_layers + len(BRANCHES) * 2 * cfg.decoder_layers
    rows = [
        ('patch embedding + positions', count(model.patch_embed) + model.pos_embed.numel()),
        ('encoder', count(model.encoder)),
        *((f'{name} decoder + queries', count(branch)) for name, branch in model.branches.items()),
        ('box heads', count(model.human_box_head) + count(model.object_box_head)),
        ('class heads', count(model.object_class_head) + count(model.verb_class_head)),
        (f'attention weight matrices ({attention_blocks} x 4d^2, included above)', attention_blocks * 4 * d * d),
        ('frozen ITM scorer', 0),
        ('total learnable', count(model)),
    ]
    table = AsciiTable([['component', 'parameters'], *[[name, f'{n:,}'] for name, n in rows]])
    table.justify_columns[1] = 'right'
    return rows, table.table
