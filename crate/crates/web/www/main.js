import init, { williams, score_sentence, correlate } from "./pkg/metval_web.js";

const $ = (id) => document.getElementById(id);
const show = (id, json) => { $(id).textContent = JSON.stringify(JSON.parse(json), null, 2); };

function runWilliams() {
  show("williams-out", williams(
    parseFloat($("r13").value), parseFloat($("r23").value), parseFloat($("r12").value),
    parseInt($("wn").value, 10), $("two").checked));
}

function runScore() {
  show("score-out", score_sentence($("hyp").value, $("refs").value, $("tok").value, $("smooth").value));
}

function runCorrelate() {
  show("corr-out", correlate($("xs").value, $("ys").value));
}

await init();
for (const id of ["r13", "r23", "r12", "wn", "two"]) $(id).addEventListener("input", runWilliams);
for (const id of ["hyp", "refs", "tok", "smooth"]) $(id).addEventListener("input", runScore);
for (const id of ["xs", "ys"]) $(id).addEventListener("input", runCorrelate);
runWilliams();
runScore();
runCorrelate();
