/**
 * DOM projection of the reader state over an augmented document.
 *
 * The host document arrives pre-annotated: mention anchors are
 * `span.cd-mention[data-mention][data-entity]`, figure overlays are
 * `svg.cd-overlay[data-figure]` with `circle.cd-point[data-entity]`
 * children. This layer binds events, dispatches them through the state
 * machine, and re-applies the derived projections after every event.
 * Popout figures are live clones wired to the same dispatch, so their
 * behavior is identical to the embedded original by construction.
 */

import { BundleIndex } from "./bundle.js";
import {
  POINT_BASE_OPACITY,
  PROXIMITY_RADIUS,
  activeMentionIds,
  proximityOpacity,
  scanCaptionDescription,
  scanPosition,
  visibleEntityIds,
} from "./derive.js";
import {
  ReaderEvent,
  ReaderState,
  Target,
  assertInvariants,
  initialState,
  reduce,
} from "./state.js";

export interface ReaderOptions {
  /** Reproduce the study condition: swallow Ctrl/Cmd-F. */
  studyMode?: boolean;
  /** Throw on any invariant violation after an event (used in tests). */
  checkInvariants?: boolean;
}

export class ReaderView {
  readonly index: BundleIndex;
  state: ReaderState;
  private readonly doc: Document;
  private readonly root: Element;
  private readonly options: ReaderOptions;
  private panelElement: HTMLElement | null = null;
  private popoutElement: HTMLElement | null = null;
  private banner: HTMLElement | null = null;
  private findSuppressor: ((event: Event) => void) | null = null;

  constructor(root: Element, index: BundleIndex, options: ReaderOptions = {}) {
    this.root = root;
    this.doc = root.ownerDocument;
    this.index = index;
    this.options = options;
    this.state = initialState();
  }

  /** Bind all affordances and paint the initial state. */
  mount(): this {
    if (this.detectMismatch()) {
      this.state = reduce(this.state, { kind: "toggle-linking" }, this.index);
      this.showMismatchBanner();
    }
    this.bindMentions(this.root);
    this.bindOverlays(this.root);
    this.buildToolbar();
    this.buildVisualIndex();
    this.buildScanControls();
    if (this.options.studyMode) this.suppressFind();
    this.apply();
    return this;
  }

  dispatch(event: ReaderEvent): void {
    this.state = reduce(this.state, event, this.index);
    if (this.options.checkInvariants) assertInvariants(this.state, this.index);
    this.apply();
  }

  /** Scroll the main view to an anchored element; panel state unchanged. */
  jump(anchorId: string): void {
    const el = this.doc.getElementById(anchorId);
    if (!el) {
      console.warn(`jump target ${anchorId} not found`);
      return;
    }
    if (typeof (el as HTMLElement).scrollIntoView === "function") {
      (el as HTMLElement).scrollIntoView();
    }
  }

  // --- wiring ---------------------------------------------------------

  private targetOf(el: Element): Target | null {
    const mentionId = el.getAttribute("data-mention");
    if (mentionId) return { kind: "phrase", mentionId };
    const entityId = el.getAttribute("data-entity");
    if (entityId) return { kind: "point", entityId };
    return null;
  }

  private bindInteractive(el: Element): void {
    const target = this.targetOf(el);
    if (!target) return;
    el.addEventListener("mouseenter", () =>
      this.dispatch({ kind: "hover", target }),
    );
    el.addEventListener("mouseleave", () =>
      this.dispatch({ kind: "hover", target: null }),
    );
    el.addEventListener("click", () => this.dispatch({ kind: "select", target }));
  }

  private bindMentions(scope: Element): void {
    for (const el of scope.querySelectorAll(".cd-mention[data-mention]")) {
      this.bindInteractive(el);
    }
  }

  private bindOverlays(scope: Element): void {
    for (const overlay of scope.querySelectorAll("svg.cd-overlay")) {
      for (const circle of overlay.querySelectorAll("circle.cd-point")) {
        this.bindInteractive(circle);
      }
      overlay.parentElement?.addEventListener("mousemove", (event) =>
        this.applyProximity(overlay, event as MouseEvent),
      );
    }
  }

  private suppressFind(): void {
    this.findSuppressor = (event) => {
      const key = event as KeyboardEvent;
      if ((key.ctrlKey || key.metaKey) && key.key.toLowerCase() === "f") {
        key.preventDefault();
      }
    };
    this.doc.addEventListener("keydown", this.findSuppressor);
  }

  /** Detach document-level listeners (element listeners die with the DOM). */
  unmount(): void {
    if (this.findSuppressor) {
      this.doc.removeEventListener("keydown", this.findSuppressor);
      this.findSuppressor = null;
    }
  }

  private detectMismatch(): boolean {
    for (const mention of this.index.bundle.mentions) {
      const selector = `[data-mention="${mention.mention_id}"]`;
      if (!this.root.querySelector(selector)) return true;
    }
    return false;
  }

  private showMismatchBanner(): void {
    this.banner = this.doc.createElement("div");
    this.banner.className = "cd-banner";
    this.banner.textContent =
      "Augmentations do not match this document revision; showing the plain view.";
    this.root.prepend(this.banner);
  }

  // --- chrome ------------------------------------------------------------

  private buildToolbar(): void {
    const bar = this.doc.createElement("div");
    bar.className = "cd-toolbar";
    const toggle = this.doc.createElement("button");
    toggle.className = "cd-linking-toggle";
    toggle.addEventListener("click", () =>
      this.dispatch({ kind: "toggle-linking" }),
    );
    bar.append(toggle);
    this.root.prepend(bar);
  }

  private buildVisualIndex(): void {
    const nav = this.doc.createElement("nav");
    nav.className = "cd-visual-index";
    for (const figure of this.root.querySelectorAll("figure")) {
      const img = figure.querySelector("img");
      const thumb = this.doc.createElement("img");
      thumb.className = "cd-thumb";
      if (img?.getAttribute("src")) {
        thumb.setAttribute("src", img.getAttribute("src")!);
      }
      const anchor = figure.id;
      thumb.addEventListener("click", () => this.jump(anchor));
      nav.append(thumb);
    }
    this.root.append(nav);
  }

  private buildScanControls(): void {
    for (const overlay of this.root.querySelectorAll("svg.cd-overlay")) {
      const figureNumber = Number(overlay.getAttribute("data-figure"));
      if (!this.index.scanSequence(figureNumber).length) continue;
      const figure = overlay.closest("figure");
      const caption = figure?.querySelector("figcaption");
      if (!figure || !caption) continue;
      const controls = this.doc.createElement("div");
      controls.className = "cd-scan-controls";
      controls.setAttribute("data-figure", String(figureNumber));
      for (const direction of ["start", "prev", "next", "stop"] as const) {
        const button = this.doc.createElement("button");
        button.className = `cd-scan-${direction}`;
        button.textContent = direction;
        button.addEventListener("click", () =>
          this.dispatch({ kind: "scan", figure: figureNumber, direction }),
        );
        controls.append(button);
      }
      const popoutButton = this.doc.createElement("button");
      popoutButton.className = "cd-popout-open";
      popoutButton.textContent = "popout";
      popoutButton.addEventListener("click", () =>
        this.dispatch({ kind: "popout-open", figure: figureNumber }),
      );
      controls.append(popoutButton);
      caption.after(controls);
    }
  }

  // --- painting -------------------------------------------------------------

  private apply(): void {
    this.root.classList.toggle("cd-linking-off", !this.state.linkingMode);
    this.applyMentions();
    this.applyOverlay(this.root);
    this.applyScanDescription();
    this.applyPanel();
    this.applyPopout();
  }

  private applyMentions(): void {
    const active = activeMentionIds(this.state, this.index);
    for (const el of this.root.querySelectorAll(".cd-mention[data-mention]")) {
      const id = el.getAttribute("data-mention")!;
      el.classList.toggle("cd-active", active.has(id));
      el.classList.toggle("cd-hidden", !this.state.linkingMode);
    }
  }

  /** Repaint the circles of every overlay inside `scope`. */
  private applyOverlay(scope: Element): void {
    for (const overlay of scope.querySelectorAll("svg.cd-overlay")) {
      const figureNumber = Number(overlay.getAttribute("data-figure"));
      const visible = visibleEntityIds(this.state, this.index, figureNumber);
      const activeId = this.state.hoveredEntity ?? this.state.selectedEntity;
      for (const circle of overlay.querySelectorAll("circle.cd-point")) {
        const entityId = circle.getAttribute("data-entity")!;
        const shown = visible.has(entityId);
        (circle as SVGElement).setAttribute(
          "display",
          shown ? "inline" : "none",
        );
        (circle as SVGElement).setAttribute(
          "opacity",
          String(entityId === activeId ? 1 : POINT_BASE_OPACITY),
        );
        circle.classList.toggle("cd-active", entityId === activeId);
      }
    }
  }

  private applyProximity(overlay: Element, event: MouseEvent): void {
    if (!this.state.linkingMode) return;
    const host = overlay.parentElement;
    if (!host || typeof host.getBoundingClientRect !== "function") return;
    const box = host.getBoundingClientRect();
    if (!box.width || !box.height) return;
    const activeId = this.state.hoveredEntity ?? this.state.selectedEntity;
    for (const circle of overlay.querySelectorAll("circle.cd-point")) {
      if (circle.getAttribute("display") === "none") continue;
      const entityId = circle.getAttribute("data-entity");
      if (entityId === activeId) continue;
      const cx = box.left + (parseFloat(circle.getAttribute("cx")!) / 100) * box.width;
      const cy = box.top + (parseFloat(circle.getAttribute("cy")!) / 100) * box.height;
      const distance = Math.hypot(event.clientX - cx, event.clientY - cy);
      (circle as SVGElement).setAttribute(
        "opacity",
        proximityOpacity(distance).toFixed(3),
      );
    }
  }

  private applyScanDescription(): void {
    for (const el of this.root.querySelectorAll(".cd-scan-description")) {
      el.remove();
    }
    const step = scanCaptionDescription(this.state, this.index);
    if (!step) return;
    const overlay = this.root.querySelector(
      `svg.cd-overlay[data-figure="${step.figure}"]`,
    );
    const caption = overlay?.closest("figure")?.querySelector("figcaption");
    if (!caption) return;
    const box = this.doc.createElement("div");
    box.className = "cd-scan-description";
    const position = scanPosition(this.state, this.index);
    box.setAttribute("data-entity", step.entityId);
    box.textContent = position
      ? `(${position.step}/${position.total}) ${step.text ?? ""}`.trim()
      : step.text ?? "";
    caption.after(box);
  }

  private applyPanel(): void {
    if (!this.state.panel.open || !this.state.panel.content) {
      this.panelElement?.remove();
      this.panelElement = null;
      return;
    }
    const content = this.state.panel.content;
    if (!this.panelElement) {
      this.panelElement = this.doc.createElement("aside");
      this.panelElement.className = "cd-panel";
      this.root.append(this.panelElement);
    }
    const panel = this.panelElement;
    panel.textContent = "";

    const close = this.doc.createElement("button");
    close.className = "cd-panel-close";
    close.textContent = "close";
    close.addEventListener("click", () => this.dispatch({ kind: "close-panel" }));
    panel.append(close);

    const figure = this.root.querySelector(
      `svg.cd-overlay[data-figure="${content.figureNumber}"]`,
    )?.closest("figure");
    const copy = this.doc.createElement("div");
    copy.className = "cd-panel-figure";
    const img = figure?.querySelector("img");
    if (img) copy.append(img.cloneNode(false));
    panel.append(copy);

    const heading = this.doc.createElement("h2");
    heading.className = "cd-panel-label";
    heading.textContent = content.label;
    panel.append(heading);

    const description = this.doc.createElement("p");
    description.className = "cd-panel-description";
    description.textContent =
      content.description ?? "No description available.";
    panel.append(description);

    panel.append(this.referenceList(
      "cd-panel-direct", "Direct references",
      content.directReferences.map((ref) => ({
        label: ref.phrase,
        anchor: ref.hostId,
      })),
    ));
    panel.append(this.referenceList(
      "cd-panel-related", "Other related passages",
      content.relatedPassages.map((idx) => {
        const passage = this.doc.getElementById(`cd-p${idx}`)
          ?? this.passageByOrdinal(idx);
        return {
          label: passage?.textContent?.slice(0, 80) ?? `passage ${idx}`,
          anchor: passage?.id ?? "",
          expandText: passage?.textContent ?? null,
        };
      }),
    ));
  }

  private passageByOrdinal(ordinal: number): HTMLElement | null {
    const passages = this.root.querySelectorAll("main p, body p, p");
    return (passages[ordinal] as HTMLElement) ?? null;
  }

  private referenceList(
    className: string,
    title: string,
    items: { label: string; anchor: string; expandText?: string | null }[],
  ): HTMLElement {
    const section = this.doc.createElement("section");
    section.className = className;
    const heading = this.doc.createElement("h3");
    heading.textContent = title;
    section.append(heading);
    const list = this.doc.createElement("ul");
    for (const item of items) {
      const entry = this.doc.createElement("li");
      const link = this.doc.createElement("a");
      link.className = "cd-panel-jump";
      link.textContent = item.label;
      link.addEventListener("click", (event) => {
        event.preventDefault();
        if (item.anchor) this.jump(item.anchor);
      });
      entry.append(link);
      if (item.expandText) {
        const expand = this.doc.createElement("button");
        expand.className = "cd-panel-expand";
        expand.textContent = "expand";
        expand.addEventListener("click", () => {
          const full = this.doc.createElement("blockquote");
          full.className = "cd-panel-full-passage";
          full.textContent = item.expandText!;
          entry.append(full);
          expand.remove();
        });
        entry.append(expand);
      }
      list.append(entry);
    }
    section.append(list);
    return section;
  }

  private applyPopout(): void {
    if (!this.state.popout) {
      this.popoutElement?.remove();
      this.popoutElement = null;
      return;
    }
    const { figure, rect } = this.state.popout;
    if (!this.popoutElement
        || this.popoutElement.getAttribute("data-figure") !== String(figure)) {
      this.popoutElement?.remove();
      this.popoutElement = this.buildPopout(figure);
      if (this.popoutElement) this.root.append(this.popoutElement);
    }
    const el = this.popoutElement;
    if (!el) return;
    el.style.left = `${rect.x}px`;
    el.style.top = `${rect.y}px`;
    el.style.width = `${rect.width}px`;
    el.style.height = `${rect.height}px`;
    this.applyOverlay(el);
  }

  private buildPopout(figureNumber: number): HTMLElement | null {
    const overlay = this.root.querySelector(
      `svg.cd-overlay[data-figure="${figureNumber}"]`,
    );
    const figure = overlay?.closest("figure");
    if (!figure) return null;
    const popout = this.doc.createElement("div");
    popout.className = "cd-popout";
    popout.setAttribute("data-figure", String(figureNumber));
    const body = this.doc.createElement("div");
    body.className = "cd-popout-body";
    const img = figure.querySelector("img");
    if (img) body.append(img.cloneNode(false));
    if (overlay) {
      // same interactive points and behaviors as the embedded figure:
      // the clone is rebound to the same dispatcher
      const clone = overlay.cloneNode(true) as Element;
      body.append(clone);
      for (const circle of clone.querySelectorAll("circle.cd-point")) {
        this.bindInteractive(circle);
      }
    }
    const close = this.doc.createElement("button");
    close.className = "cd-popout-close";
    close.textContent = "close";
    close.addEventListener("click", () => this.dispatch({ kind: "popout-close" }));
    popout.append(close, body);
    return popout;
  }
}

export { PROXIMITY_RADIUS };
