/** Renders the language dialog's current phase as a prompt plus the
 * choices the user can click; each choice carries its UI event. */

import type { DialogView } from "./api.js";
import type { UiEvent } from "./commands.js";

export interface Choice {
  label: string;
  event: UiEvent;
}

export interface PromptPanel {
  text: string;
  choices: Choice[];
}

export function promptFor(
  view: DialogView,
  languages: Record<string, string>,
): PromptPanel {
  const languageChoices = (make: (tag: string) => UiEvent): Choice[] =>
    Object.entries(languages).map(([tag, name]) => ({
      label: name,
      event: make(tag),
    }));

  switch (view.phase) {
    case "await_source_confirm":
      return {
        text: view.prompt || "Is the detected language right?",
        choices: [
          { label: "yes", event: { kind: "dialogAck", yes: true } },
          { label: "no", event: { kind: "dialogAck", yes: false } },
        ],
      };
    case "await_manual_source":
      return {
        text: view.prompt || "Which language are you speaking?",
        choices: languageChoices((tag) => ({ kind: "dialogSource", lang: tag })),
      };
    case "await_target":
      return {
        text: view.prompt || "Which language should I answer in?",
        choices: languageChoices((tag) => ({ kind: "dialogTarget", lang: tag })),
      };
    case "ready":
      return {
        text: `Ready (${view.source} -> ${view.target}). Say a command.`,
        choices: [{ label: "reset languages", event: { kind: "dialogReset" } }],
      };
    default:
      return { text: "Type a command to begin.", choices: [] };
  }
}
