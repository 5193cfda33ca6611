/**
 * Entry point: fetch the document and bundle named in the URL, inject
 * the paper into the page, and mount the interactive reader on top.
 * The base variant (and any bundle mismatch) renders without anchors.
 */

import { fetchBundle, fetchDocumentHtml, parseReaderParams } from "./api.js";
import { BundleIndex } from "./bundle.js";
import { ReaderView } from "./view.js";

export async function boot(
  win: Window,
  baseUrl = "",
): Promise<ReaderView | null> {
  const params = parseReaderParams(win.location.search);
  const html = await fetchDocumentHtml(baseUrl, params.docId, params.variant);
  const host = win.document.createElement("div");
  host.className = "cd-reader";
  host.innerHTML = html;
  win.document.body.append(host);

  if (params.variant === "base") {
    return null; // plain reading view: no augmentations to mount
  }
  const bundle = await fetchBundle(baseUrl, params.docId);
  const view = new ReaderView(host, new BundleIndex(bundle), {
    studyMode: params.studyMode,
  });
  return view.mount();
}

export { BundleIndex, parseBundle } from "./bundle.js";
export { ReaderView } from "./view.js";
export * from "./state.js";
export * from "./derive.js";
