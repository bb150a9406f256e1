// Single-key review bindings: the operator is on a moving boat, so
// verdicts must not require aiming at buttons.

export interface KeyboardHandlers {
  verdictSelected(verdict: "tp" | "fp"): void;
  moveSelection(delta: number): void;
  openSelected(): void;
  closeViewer(): void;
  moveViewer(delta: number): void;
  toggleUnreviewed(): void;
  viewerOpen(): boolean;
}

function inTextEntry(target: EventTarget | null): boolean {
  if (!(target instanceof HTMLElement)) return false;
  return target.tagName === "INPUT" || target.tagName === "TEXTAREA" || target.isContentEditable;
}

export function bindKeyboard(handlers: KeyboardHandlers, target: EventTarget = document): () => void {
  const onKey = (raw: Event) => {
    const ev = raw as KeyboardEvent;
    if (ev.ctrlKey || ev.metaKey || ev.altKey || inTextEntry(ev.target)) return;
    let handled = true;
    switch (ev.key) {
      case "t":
        handlers.verdictSelected("tp");
        break;
      case "f":
        handlers.verdictSelected("fp");
        break;
      case "u":
        handlers.toggleUnreviewed();
        break;
      case "Escape":
        handlers.closeViewer();
        break;
      case "Enter":
      case "o":
        if (!handlers.viewerOpen()) handlers.openSelected();
        break;
      case "ArrowLeft":
        handlers.viewerOpen() ? handlers.moveViewer(-1) : handlers.moveSelection(-1);
        break;
      case "ArrowRight":
        handlers.viewerOpen() ? handlers.moveViewer(1) : handlers.moveSelection(1);
        break;
      case "ArrowUp":
      case "k":
        if (!handlers.viewerOpen()) handlers.moveSelection(-1);
        break;
      case "ArrowDown":
      case "j":
        if (!handlers.viewerOpen()) handlers.moveSelection(1);
        break;
      default:
        handled = false;
    }
    if (handled) ev.preventDefault();
  };
  target.addEventListener("keydown", onKey);
  return () => target.removeEventListener("keydown", onKey);
}
