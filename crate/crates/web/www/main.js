import init, { WarpExplorer, Resampling, Session } from "./pkg/cmsr_web.js";

const $ = (id) => document.getElementById(id);
const SIZE = 128;

function paint(id, size, rgba) {
  const c = $(id);
  c.width = size;
  c.height = size;
  c.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
}

function bindValue(id, digits = 1) {
  const show = () => ($(id + "-v").textContent = Number($(id).value).toFixed(digits));
  $(id).addEventListener("input", show);
  show();
}

function setupWarp() {
  const ex = new WarpExplorer(3, SIZE);
  const ids = ["w-angle", "w-tx", "w-ty", "w-scale", "w-cpab", "w-tps"];
  ids.forEach((id) => bindValue(id, id === "w-scale" || id === "w-cpab" ? 2 : 1));
  const draw = () => {
    const v = (id) => Number($(id).value);
    ex.set_affine(v("w-angle"), v("w-tx"), v("w-ty"), v("w-scale"));
    ex.set_cpab(v("w-cpab"), 7);
    ex.set_tps(v("w-tps"), 0);
    paint("w-guide", ex.size(), ex.warped());
    paint("w-overlay", ex.size(), ex.overlay());
    $("w-disp").textContent = ex.mean_displacement().toFixed(2);
  };
  ids.forEach((id) => $(id).addEventListener("input", draw));
  draw();
}

function setupResample() {
  bindValue("r-iters", 0);
  const draw = () => {
    const r = new Resampling(Number($("r-seed").value), SIZE, Number($("r-factor").value), Number($("r-iters").value));
    paint("r-lr", r.size(), r.lr_view());
    paint("r-bic", r.size(), r.bicubic());
    paint("r-ref", r.size(), r.refined());
    $("r-psnr-b").textContent = r.psnr_bicubic().toFixed(2);
    $("r-psnr-r").textContent = r.psnr_refined().toFixed(2);
    const t = r.trace();
    $("r-trace").textContent = `${t[0].toExponential(2)} → ${t[t.length - 1].toExponential(2)}`;
    r.free();
  };
  ["r-factor", "r-iters", "r-seed"].forEach((id) => $(id).addEventListener("input", draw));
  draw();
}

function plotLoss(trace) {
  const c = $("t-loss-plot");
  const g = c.getContext("2d");
  g.fillStyle = "#222";
  g.fillRect(0, 0, c.width, c.height);
  if (trace.length < 2) return;
  const logs = Array.from(trace, (v) => Math.log10(v));
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  g.strokeStyle = "#8cf";
  g.beginPath();
  logs.forEach((v, i) => {
    const x = (i / (logs.length - 1)) * c.width;
    const y = c.height - ((v - lo) / (hi - lo || 1)) * (c.height - 8) - 4;
    i ? g.lineTo(x, y) : g.moveTo(x, y);
  });
  g.stroke();
}

function setupTrain() {
  let session;
  let running = false;
  const show = (loss) => {
    $("t-iter").textContent = session.iterations();
    if (!Number.isNaN(loss)) $("t-loss").textContent = loss.toFixed(5);
    $("t-lr").textContent = session.learning_rate().toExponential(0);
    $("t-psnr").textContent = session.psnr().toFixed(2);
    $("t-bic").textContent = session.psnr_bicubic().toFixed(2);
    const [tx, ty] = session.translation_px();
    $("t-shift-v").textContent = `${tx.toFixed(2)}, ${ty.toFixed(2)}`;
    paint("t-sr", session.size(), session.preview());
    paint("t-overlay", session.size(), session.overlay());
    plotLoss(session.loss_trace());
  };
  const reset = () => {
    running = false;
    $("t-run").textContent = "run";
    session?.free();
    session = new Session(Number($("t-seed").value), 64, Number($("t-shift").value));
    $("t-loss").textContent = "-";
    show(NaN);
  };
  const tick = () => {
    if (!running) return;
    show(session.step(5));
    if (session.stopped()) {
      running = false;
      $("t-run").textContent = "run";
      return;
    }
    requestAnimationFrame(tick);
  };
  $("t-reset").addEventListener("click", reset);
  $("t-step").addEventListener("click", () => show(session.step(10)));
  $("t-run").addEventListener("click", () => {
    running = !running;
    $("t-run").textContent = running ? "pause" : "run";
    tick();
  });
  reset();
}

await init();
setupWarp();
setupResample();
setupTrain();
