import { PoseClient, ApiError } from "./api";
import { AnnotationBoard } from "./annotate2d";
import { Debouncer } from "./debounce";
import { SkeletonEditor } from "./editor";
import { FIXTURE_LABELS, FIXTURE_SOFT_TOLERANCE } from "./fixture";
import { clonePose, maxBoneDeviation } from "./geometry";
import { RequestSequencer } from "./sequence";
import { EditorState } from "./state";
import type { MaskSpec, Meta } from "./types";

const DRAG_DEBOUNCE_MS = 60;
const BONE_TOLERANCE = 1e-3;

const el = (id: string) => document.getElementById(id)!;

function toast(message: string, isError = false): void {
  const box = el("toasts");
  const item = document.createElement("div");
  item.className = "toast" + (isError ? " error" : "");
  item.textContent = message;
  box.appendChild(item);
  setTimeout(() => item.remove(), 4000);
}

async function boot(): Promise<void> {
  const client = new PoseClient("");
  let meta: Meta;
  try {
    meta = await client.meta();
  } catch {
    el("status").textContent = "disconnected - start `sparsepose serve` and reload";
    el("status").classList.add("offline");
    return;
  }

  const state = new EditorState(new Array(meta.dim).fill(0), meta.default_kappa,
    meta.kappa_max);
  const debouncer = new Debouncer(DRAG_DEBOUNCE_MS);
  const sequencer = new RequestSequencer();
  const board = new AnnotationBoard(el("annotate") as HTMLCanvasElement);

  const kappaSlider = el("kappa") as HTMLInputElement;
  kappaSlider.max = String(meta.kappa_max);
  kappaSlider.value = String(state.kappa);
  el("kappa-value").textContent = String(state.kappa);

  function report(latencyMs: number | null, residual: number | null): void {
    const deviation = maxBoneDeviation(state.pose, meta.joints);
    el("bone-check").textContent =
      `bone dev ${deviation.toExponential(2)} ` +
      (deviation <= BONE_TOLERANCE ? "ok" : "OVER");
    (el("bone-check") as HTMLElement).classList.toggle("bad", deviation > BONE_TOLERANCE);
    el("latency").textContent = latencyMs === null ? "-" : `${latencyMs.toFixed(0)} ms`;
    el("residual").textContent = residual === null ? "-" : residual.toExponential(2);
  }

  function currentMask(): MaskSpec {
    if (state.pinned.size === 0) return "identity";
    const observed = new Set(state.pinned);
    if (state.dragging !== null) observed.add(state.dragging);
    return { joints: [...observed].sort((a, b) => a - b) };
  }

  function resolveDrag(): void {
    const seq = sequencer.next();
    const sent = clonePose(state.pose);
    const t0 = performance.now();
    client
      .synthesize(sent, currentMask(), state.kappa)
      .then((res) => {
        if (!sequencer.accept(seq)) return; // superseded by a newer drag
        state.connected = true;
        el("status").textContent = "connected";
        el("status").classList.remove("offline");
        if (state.dragging === null) {
          state.adoptPose(res.pose);
          editor.setPose(state.pose);
        }
        report(performance.now() - t0, res.ik_residual);
        if (res.warnings.length) el("warnings").textContent = res.warnings.join("; ");
        else el("warnings").textContent = "";
      })
      .catch((err) => {
        if (err instanceof ApiError) {
          toast(`solve failed - ${err.message}`, true);
        } else {
          state.connected = false;
          el("status").textContent = "disconnected - edits queued locally";
          el("status").classList.add("offline");
        }
      });
  }

  const editor = new SkeletonEditor(el("viewport"), {
    onSelect(jointId) {
      state.selected = jointId;
      editor.setSelected(jointId);
      el("selected").textContent = `joint ${jointId}`;
    },
    onDragStart(jointId) {
      if (!state.beginDrag(jointId)) return false;
      return true;
    },
    onDragMove(jointId, position) {
      state.applyEdit(jointId, position);
      if (state.connected) debouncer.schedule(resolveDrag);
    },
    onDragEnd() {
      state.endDrag();
      debouncer.cancel();
      if (state.connected) resolveDrag();
      else toast("offline: edit queued", true);
    }
  });

  editor.buildSkeleton(meta.joints);

  // fresh session: ask the server for a natural rest pose from the origin
  try {
    const seeded = await client.synthesize(state.pose, "identity", 1);
    state.adoptPose(seeded.pose);
  } catch {
    /* keep zeros; the first drag will resolve */
  }
  editor.setPose(state.pose);
  report(null, null);
  el("status").textContent = "connected";

  kappaSlider.addEventListener("input", () => {
    state.setKappa(Number(kappaSlider.value));
    el("kappa-value").textContent = String(state.kappa);
    if (state.connected) debouncer.schedule(resolveDrag);
  });

  el("pin").addEventListener("click", () => {
    if (state.selected === null) return;
    state.togglePin(state.selected);
    editor.setPinned(state.pinned);
  });

  el("retry").addEventListener("click", () => {
    const queued = state.drainQueue();
    if (queued.length) toast(`replaying ${queued.length} queued edits`);
    state.connected = true;
    resolveDrag();
  });

  // ---- 2D annotation mode ----
  const canvas = el("annotate") as HTMLCanvasElement;
  const solve2d = new Debouncer(DRAG_DEBOUNCE_MS);

  function resolve2d(): void {
    const labels = board.labelList();
    if (labels.length < 2) {
      el("reproj").textContent = "need >= 2 labels";
      return;
    }
    const seq = sequencer.next();
    const t0 = performance.now();
    client
      .complete2d(labels, state.kappa)
      .then((res) => {
        if (!sequencer.accept(seq)) return;
        state.adoptPose(res.pose);
        editor.setPose(state.pose);
        board.setOverlayPose(res.pose);
        const ok = res.reprojection_residual < FIXTURE_SOFT_TOLERANCE;
        el("reproj").textContent =
          `reprojection ${res.reprojection_residual.toFixed(3)} ` +
          `(soft tol ${FIXTURE_SOFT_TOLERANCE}) ${ok ? "ok" : "high"}` +
          (res.under_determined ? " - under-determined" : "");
        report(performance.now() - t0, res.reprojection_residual);
      })
      .catch((err) => toast(`completion failed - ${err}`, true));
  }

  canvas.addEventListener("pointerdown", (e) => {
    if (state.selected === null) {
      toast("select a joint in the 3D view first");
      return;
    }
    const rect = canvas.getBoundingClientRect();
    if (e.shiftKey) board.removeLabel(state.selected);
    else board.clickAt(e.clientX - rect.left, e.clientY - rect.top, state.selected);
    solve2d.schedule(resolve2d);
  });

  el("fixture").addEventListener("click", () => {
    board.clear();
    for (const label of FIXTURE_LABELS) board.setLabel(label.joint, label.u, label.v);
    solve2d.schedule(resolve2d);
  });

  el("clear-labels").addEventListener("click", () => {
    board.clear();
    el("reproj").textContent = "-";
  });

  el("image-file").addEventListener("change", (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const img = new Image();
    img.onload = () => board.setImage(img);
    img.src = URL.createObjectURL(file);
  });

  board.draw();
}

boot();
