"""Fits the toy people and action weights on simulator data and exports them.

Inference runs in C++; torch is only used here, offline, to fit parameters of
networks with the same wiring as the descriptors in action4d. Scenes are built
from seeds: training seeds never overlap the held-out seeds used by the tests
(>= 100000) or by the final check in this script (>= 50000).

    PYTHONPATH=build/python python3 tools/fit_toy_weights.py --out data/weights
"""
import argparse
import json
import math
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

import action4d as a4d

ROOM = [
    {"kind": "box", "center": [6.1, 0.0, 2.5], "yaw": 0.0, "size": [0.2, 12.4, 5.0]},
    {"kind": "box", "center": [-6.1, 0.0, 2.5], "yaw": 0.0, "size": [0.2, 12.4, 5.0]},
    {"kind": "box", "center": [0.0, 6.1, 2.5], "yaw": 0.0, "size": [12.4, 0.2, 5.0]},
    {"kind": "box", "center": [0.0, -6.1, 2.5], "yaw": 0.0, "size": [12.4, 0.2, 5.0]},
    {"kind": "box", "center": [0.0, 0.0, 5.1], "yaw": 0.0, "size": [12.4, 12.4, 0.2]},
]
GESTURES = (0, 1, 2)


class Setup:
    """Camera rig, grid and detection parameters for one voxel resolution."""

    def __init__(self, fine):
        if fine:
            self.cams = a4d.ring_rig(width=512, height=424)
            self.spec = a4d.GridSpec.full_default()
            self.sigma, self.radius, self.min_height = 2.0, 5, 16.0
        else:
            self.cams = a4d.ring_rig()
            self.spec = a4d.GridSpec.desk_profile()
            self.sigma, self.radius, self.min_height = 1.0, 3, 8.0

    def column(self, x, y):
        o, s = self.spec.origin, self.spec.voxel_size
        return math.floor((x - o[0]) / s + 0.5), math.floor((y - o[1]) / s + 0.5)

    def observe(self, scene, frame):
        depths = [a4d.render_depth(scene, frame, c) for c in self.cams]
        occ = a4d.reconstruct(self.spec, self.cams, depths)
        env = a4d.smooth(a4d.topdown_envelope(occ, self.spec), self.sigma)
        cands = a4d.detect_candidates(env, self.radius, self.min_height)
        return occ, [(m, n) for m, n, _ in cands]


def is_fine(seed):
    return seed % 5 == 0


def boxes(seed, rng, count=12, half=3.0):
    return [p for p in json.loads(a4d.random_clutter(seed, count, half)) if p["kind"] == "box"]


def free_spot(rng, furniture, persons, half=2.8):
    for _ in range(200):
        x, y = rng.uniform(-half, half, size=2)
        if (all(math.hypot(x - tx, y - ty) > 1.2 for tx, ty in furniture)
                and all(math.hypot(x - tx, y - ty) > 0.6 for tx, ty in persons)):
            return float(x), float(y)
    return None


def people_scene(seed):
    rng = np.random.default_rng(seed)
    furniture = boxes(seed, rng)
    centres = [(b["center"][0], b["center"][1]) for b in furniture]
    taken, persons = [], []
    for pid in range(1, int(rng.integers(1, 4)) + 1):
        spot = free_spot(rng, centres, taken)
        if spot is None:
            break
        taken.append(spot)
        persons.append({"id": pid, "radius": float(rng.uniform(0.17, 0.23)), "height": float(rng.uniform(1.5, 1.9)),
                        "track": [[0, spot[0], spot[1], float(rng.uniform(0, 2 * math.pi))]],
                        "labels": [[0, int(rng.integers(0, 16))]]})
    return {"frame_rate": 15, "frames": 1, "floor": True, "primitives": ROOM + furniture, "persons": persons}


def people_crops(seed):
    """(crop, label) pairs. Crops centred within 3 voxels of a person are 1
    (the person's column, a jittered copy of it and nearby detections);
    crops at boxes and at detections 6 or more voxels from every person are 0."""
    setup = Setup(is_fine(seed))
    rng = np.random.default_rng(seed + 7)
    doc = people_scene(seed)
    scene = a4d.parse_scene(json.dumps(doc))
    occ, cands = setup.observe(scene, 0)
    people = [(m, n) for _, m, n in a4d.ground_truth_detections(scene, 0, setup.spec)]
    out = []
    for m, n in people:
        out.append((a4d.crop_person(occ, setup.spec, m, n), 1))
        dm, dn = rng.integers(-2, 3, size=2)
        out.append((a4d.crop_person(occ, setup.spec, m + int(dm), n + int(dn)), 1))
    for m, n in cands:
        d = min((math.hypot(m - pm, n - pn) for pm, pn in people), default=1e9)
        if d <= 3.0:
            out.append((a4d.crop_person(occ, setup.spec, m, n), 1))
        elif d >= 6.0:
            out.append((a4d.crop_person(occ, setup.spec, m, n), 0))
    for b in doc["primitives"][len(ROOM):]:
        m, n = setup.column(b["center"][0], b["center"][1])
        out.append((a4d.crop_person(occ, setup.spec, m, n), 0))
    return out


def label_runs(rng, frames):
    runs, f, prev = [], 0, -1
    while f < frames:
        label = int(rng.choice([g for g in GESTURES if g != prev]))
        runs.append([f, label])
        prev = label
        f += int(rng.integers(8, 17))
    return runs


def action_scene(seed, frames):
    rng = np.random.default_rng(seed)
    x0, y0 = rng.uniform(-2.0, 2.0, size=2)
    if rng.uniform() < 0.5:
        heading = rng.uniform(0, 2 * math.pi)
        speed = rng.uniform(0.005, 0.03)
        x1, y1 = x0 + frames * speed * math.cos(heading), y0 + frames * speed * math.sin(heading)
    else:
        heading, x1, y1 = rng.uniform(0, 2 * math.pi), x0, y0
    track = [[0, float(x0), float(y0), float(heading)], [frames - 1, float(x1), float(y1), float(heading)]]
    furniture = [b for b in boxes(seed, rng, 8, 3.0)
                 if min(math.hypot(b["center"][0] - x, b["center"][1] - y) for x, y in ((x0, y0), (x1, y1))) > 1.5]
    person = {"id": 1, "radius": float(rng.uniform(0.17, 0.23)), "height": float(rng.uniform(1.5, 1.9)),
              "track": track, "labels": label_runs(rng, frames)}
    return {"frame_rate": 15, "frames": frames, "floor": True, "primitives": ROOM + furniture, "persons": [person]}


def action_sequence(seed, frames=32):
    """Per-frame crops centred where the pipeline would centre them (the
    detection nearest the person, else the person's column) and labels."""
    setup = Setup(is_fine(seed))
    scene = a4d.parse_scene(json.dumps(action_scene(seed, frames)))
    crops, labels = [], []
    for f in range(frames):
        occ, cands = setup.observe(scene, f)
        (_, pm, pn), = a4d.ground_truth_detections(scene, f, setup.spec)
        near = [(math.hypot(m - pm, n - pn), m, n) for m, n in cands]
        near = [c for c in near if c[0] <= 3.0]
        m, n = (min(near)[1:] if near else (pm, pn))
        crops.append(a4d.crop_person(occ, setup.spec, m, n))
        labels.append(scene.label(1, f))
    return np.stack(crops), np.array(labels)


class Trunk(nn.Module):
    def __init__(self, channels=(8, 16, 32)):
        super().__init__()
        ins = (1,) + tuple(channels[:-1])
        self.convs = nn.ModuleList(nn.Conv3d(i, o, 3, padding=1) for i, o in zip(ins, channels))

    def forward(self, x):
        for k, conv in enumerate(self.convs):
            x = F.relu(conv(x))
            if k + 1 < len(self.convs):
                x = F.max_pool3d(x, 2)
        return x

    def export(self):
        out = []
        for k, conv in enumerate(self.convs):
            out.append((f"conv{k + 1}.weight", conv.weight))
            out.append((f"conv{k + 1}.bias", conv.bias))
        return out


class PeopleNetT(nn.Module):
    def __init__(self):
        super().__init__()
        self.trunk = Trunk()
        self.fc1 = nn.Linear(32, 16)
        self.fc2 = nn.Linear(16, 2)

    def forward(self, x):
        g = self.trunk(x).amax(dim=(2, 3, 4))
        return self.fc2(F.relu(self.fc1(g)))

    def export(self):
        return self.trunk.export() + [("fc1.weight", self.fc1.weight), ("fc1.bias", self.fc1.bias),
                                      ("fc2.weight", self.fc2.weight), ("fc2.bias", self.fc2.bias)]


class ActionNetT(nn.Module):
    def __init__(self, hidden=64, classes=16):
        super().__init__()
        self.trunk = Trunk()
        self.glob = nn.Conv3d(32, 32, 3, padding=1)
        self.U = nn.Parameter(torch.randn(hidden, 32) * 0.05)
        self.cell = nn.LSTMCell(64, hidden)
        self.fc1 = nn.Linear(hidden, 32)
        self.fc2 = nn.Linear(32, classes)
        self.hidden = hidden

    def forward(self, crops):
        """crops: (N, T, 31, 31, 43) -> logits (N, T, classes)."""
        n, t = crops.shape[:2]
        v = self.trunk(crops.reshape(n * t, 1, *crops.shape[2:]))
        g = F.relu(self.glob(v)).amax(dim=(2, 3, 4)).reshape(n, t, -1)
        v = v.reshape(n, t, 32, -1)
        h = crops.new_zeros(n, self.hidden)
        c = crops.new_zeros(n, self.hidden)
        logits = []
        for k in range(t):
            beta = torch.einsum("nf,nfc->nc", h @ self.U, v[:, k])
            alpha = torch.softmax(beta, dim=1)
            pooled = torch.einsum("nc,nfc->nf", alpha, v[:, k])
            h, c = self.cell(torch.cat([pooled, g[:, k]], dim=1), (h, c))
            logits.append(self.fc2(F.relu(self.fc1(h))))
        return torch.stack(logits, dim=1)

    def export(self):
        return self.trunk.export() + [
            ("global.weight", self.glob.weight), ("global.bias", self.glob.bias),
            ("attention.U", self.U),
            ("lstm.weight_ih", self.cell.weight_ih), ("lstm.weight_hh", self.cell.weight_hh),
            ("lstm.bias", self.cell.bias_ih + self.cell.bias_hh),
            ("fc1.weight", self.fc1.weight), ("fc1.bias", self.fc1.bias),
            ("fc2.weight", self.fc2.weight), ("fc2.bias", self.fc2.bias)]


def rotate(batch, k, axes):
    return torch.rot90(batch, k, axes) if k else batch


def fit_people(crops, labels, epochs, log):
    torch.manual_seed(0)
    net = PeopleNetT()
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    x = torch.from_numpy(crops).float().unsqueeze(1)
    y = torch.from_numpy(labels).long()
    weight = torch.tensor([1.0, float((y == 0).sum()) / max(1, int((y == 1).sum()))])
    for epoch in range(epochs):
        perm = torch.randperm(len(y))
        total, correct = 0.0, 0
        for i in range(0, len(y), 32):
            idx = perm[i:i + 32]
            xb = rotate(x[idx], int(torch.randint(0, 4, ())), (2, 3))
            out = net(xb)
            loss = F.cross_entropy(out, y[idx], weight=weight)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            correct += int((out.argmax(1) == y[idx]).sum())
        log(f"people epoch {epoch}: loss {total / len(y):.4f} train acc {correct / len(y):.3f}")
    return net


def pretrain_frames(net, x, y, epochs, log):
    """Fits the trunk and global branch as a per-frame classifier; the
    recurrent part does not train from a random trunk in reasonable time."""
    head = nn.Linear(32, int(y.max()) + 1)
    params = list(net.trunk.parameters()) + list(net.glob.parameters()) + list(head.parameters())
    opt = torch.optim.Adam(params, lr=1e-3)
    frames = x.reshape(-1, 1, *x.shape[2:])
    targets = y.reshape(-1)
    for epoch in range(epochs):
        perm = torch.randperm(len(targets))
        total = 0.0
        for i in range(0, len(targets), 32):
            idx = perm[i:i + 32]
            xb = rotate(frames[idx], int(torch.randint(0, 4, ())), (2, 3))
            g = F.relu(net.glob(net.trunk(xb))).amax(dim=(2, 3, 4))
            loss = F.cross_entropy(head(g), targets[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        log(f"action pretrain epoch {epoch}: loss {total / len(targets):.4f}")


def fit_action(seqs, labels, epochs, pretrain_epochs, log):
    torch.manual_seed(1)
    net = ActionNetT()
    x = torch.from_numpy(seqs).float()
    y = torch.from_numpy(labels).long()
    pretrain_frames(net, x, y, pretrain_epochs, log)
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    for epoch in range(epochs):
        perm = torch.randperm(len(y))
        total, correct, count = 0.0, 0, 0
        for i in range(0, len(y), 8):
            idx = perm[i:i + 8]
            xb = rotate(x[idx], int(torch.randint(0, 4, ())), (2, 3))
            out = net(xb)
            loss = F.cross_entropy(out.reshape(-1, out.shape[-1]), y[idx].reshape(-1))
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(net.parameters(), 5.0)
            opt.step()
            total += loss.item() * y[idx].numel()
            correct += int((out.argmax(-1) == y[idx]).sum())
            count += y[idx].numel()
        log(f"action epoch {epoch}: loss {total / count:.4f} train acc {correct / count:.3f}")
    return net


def export(net, descriptor, path):
    tensors = [(name, t.detach().numpy().astype(np.float32)) for name, t in net.export()]
    a4d.save_bundle(str(path), descriptor, tensors)


def build(cache, name, make):
    path = cache / f"{name}.npz"
    if path.exists():
        d = np.load(path)
        return d["x"], d["y"]
    x, y = make()
    np.savez_compressed(path, x=x, y=y)
    return x, y


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("data/weights"))
    ap.add_argument("--cache", type=Path, default=Path("/tmp/a4d_fit"))
    ap.add_argument("--people-scenes", type=int, default=400)
    ap.add_argument("--action-sequences", type=int, default=160)
    ap.add_argument("--people-epochs", type=int, default=12)
    ap.add_argument("--action-pretrain-epochs", type=int, default=3)
    ap.add_argument("--action-epochs", type=int, default=12)
    ap.add_argument("--threads", type=int, default=0)
    ap.add_argument("--only", choices=("people", "action"))
    args = ap.parse_args()
    if args.threads:
        torch.set_num_threads(args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    args.cache.mkdir(parents=True, exist_ok=True)
    start = time.time()

    def log(msg):
        print(f"[{time.time() - start:7.1f}s] {msg}", flush=True)

    def people_data():
        pairs = [p for s in range(args.people_scenes) for p in people_crops(s)]
        return np.stack([c for c, _ in pairs]), np.array([l for _, l in pairs])

    people_path = args.out / "people_toy.w4db"
    action_path = args.out / "action_toy.w4db"
    if args.only != "action":
        px, py = build(args.cache, f"people2_{args.people_scenes}", people_data)
        log(f"people crops: {len(py)} ({int(py.sum())} person)")
        people = fit_people(px, py, args.people_epochs, log)
        export(people, a4d.people_net_descriptor(), people_path)

    def action_data():
        seqs = [action_sequence(1000 + s) for s in range(args.action_sequences)]
        return np.stack([c for c, _ in seqs]), np.stack([l for _, l in seqs])

    if args.only != "people":
        ax, ay = build(args.cache, f"action_{args.action_sequences}", action_data)
        log(f"action sequences: {ax.shape}")
        action = fit_action(ax, ay, args.action_epochs, args.action_pretrain_epochs, log)
        export(action, a4d.action_net_descriptor(), action_path)

    # Held-out check with the C++ inference path.
    if args.only != "action":
        net = a4d.PeopleNet(str(people_path))
        right = total = 0
        for s in range(50000, 50040):
            for crop, label in people_crops(s):
                right += int((net.probability(crop) >= 0.5) == bool(label))
                total += 1
        log(f"held-out people accuracy: {right}/{total} = {right / total:.3f}")
    if args.only == "people":
        return
    accs = []
    for s in range(50000, 50012):
        crops, labels = action_sequence(s)
        pred = a4d.classify_sequence(list(crops), str(action_path))
        accs.append(a4d.evaluate(pred, labels.tolist()))
    log("held-out action Acc %.1f%% RAcc %.1f%%" % tuple(np.mean(accs, axis=0)))


if __name__ == "__main__":
    main()
