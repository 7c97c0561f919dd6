import type { ViewState } from "./store.js";
import type { ChainEntry, Recommendation } from "./types.js";

/** Pure HTML rendering of the screen state. Scores, ordering and chain
 * content come from the server untouched. */

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function chainList(title: string, entries: ChainEntry[]): string {
  if (entries.length === 0) return "";
  const items = entries
    .map((entry) => {
      const sim =
        entry.similarity === null
          ? ""
          : ` <span class="sim">${entry.similarity.toFixed(3)}</span>`;
      return `<li data-chain-node="${entry.node_id}">${esc(entry.text)}${sim}</li>`;
    })
    .join("");
  return `<section class="chain-group"><h4>${title}</h4><ul>${items}</ul></section>`;
}

function card(rec: Recommendation, state: ViewState): string {
  const roles = [...new Set(rec.matched.map((m) => m.role))];
  const badges = roles
    .map((role) => `<span class="badge badge-${role}">${role}</span>`)
    .join(" ");
  const chips = rec.claims
    .map((c) => `<span class="chip" data-claim="${c.node_id}">${esc(c.claim_id)}</span>`)
    .join(" ");
  const verdict = state.verdicts.get(rec.failure_id);
  const expanded = state.expanded.has(rec.failure_id);
  const chain = state.explanations.get(rec.failure_id);
  const pending = state.explanationPending.has(rec.failure_id);
  const itemError = state.itemErrors.get(rec.failure_id);
  let explanation = "";
  if (expanded) {
    if (chain) {
      explanation = `<div class="explanation" data-explanation="${rec.failure_id}">
        ${chainList("Causes", chain.causes)}
        ${chainList("Effects", chain.effects)}
        ${chainList("Detections", chain.detections)}
        ${chainList("Preventions", chain.preventions)}
      </div>`;
    } else if (pending) {
      explanation = `<div class="explanation loading" data-explanation="${rec.failure_id}">Loading…</div>`;
    }
  }
  return `<article class="card" data-card="${rec.failure_id}" data-verdict="${verdict ?? ""}">
    <header>
      <strong class="failure-text">${esc(rec.failure_text)}</strong>
      <span class="score">${rec.score.toFixed(3)}</span>
      ${badges}
    </header>
    <div class="claims">${chips}</div>
    <div class="actions">
      <button data-action="toggle-explanation" data-failure="${rec.failure_id}">
        ${expanded ? "Hide causes" : "Show causes"}
      </button>
      <button data-action="feedback-useful" data-item="${rec.failure_id}"
        class="${verdict === "useful" ? "active" : ""}">&#128077;</button>
      <button data-action="feedback-not-useful" data-item="${rec.failure_id}"
        class="${verdict === "not_useful" ? "active" : ""}">&#128078;</button>
      <input data-field="justification" data-failure="${rec.failure_id}"
        placeholder="justification (why this risk is covered)"
        value="${esc(state.justificationDrafts.get(rec.failure_id) ?? "")}">
      <button data-action="insert-risk-text" data-failure="${rec.failure_id}">
        Add to risk evaluation
      </button>
    </div>
    ${itemError ? `<p class="item-error">${esc(itemError)}</p>` : ""}
    ${explanation}
  </article>`;
}

export function render(state: ViewState): string {
  const form = `<form data-form="deviation">
    <label>Impacted part or assembly
      <input data-field="partRef" name="partRef" value="${esc(state.form.partRef)}">
    </label>
    <label>Current definition
      <textarea data-field="currentDefinition" name="currentDefinition">${esc(state.form.currentDefinition)}</textarea>
    </label>
    <label>Requested deviation
      <textarea data-field="requestedDeviation" name="requestedDeviation">${esc(state.form.requestedDeviation)}</textarea>
    </label>
    <button type="submit" ${state.phase === "loading" ? "disabled" : ""}>Check risks</button>
  </form>`;

  let banner = "";
  if (state.phase === "error" && state.errorMessage) {
    const suggestions = state.suggestions
      .map(
        (name) =>
          `<button data-action="suggestion" data-name="${esc(name)}">${esc(name)}</button>`,
      )
      .join(" ");
    const retry = state.retryable
      ? `<button data-action="retry">Retry</button>`
      : "";
    banner = `<div class="banner error" data-banner="error">
      <span>${esc(state.errorMessage)}</span>
      ${suggestions ? `<div class="suggestions">Did you mean: ${suggestions}</div>` : ""}
      ${retry}
    </div>`;
  }

  let results = "";
  if (state.phase === "loading") {
    results = `<p class="loading" data-loading>Scoring deviation…</p>`;
  } else if (state.result) {
    if (state.result.recommendations.length === 0) {
      results = `<p class="empty" data-empty>No risks matched above the similarity threshold for this part.</p>`;
    } else {
      results = state.result.recommendations
        .map((rec) => card(rec, state))
        .join("\n");
    }
  }

  return `<main>
    <h1>Deviation risk check</h1>
    ${form}
    ${banner}
    <section class="results" data-results>${results}</section>
    <section class="risk-evaluation">
      <h3>Risk evaluation</h3>
      <textarea data-field="riskEvaluation" rows="10">${esc(state.riskEvaluation)}</textarea>
    </section>
  </main>`;
}
