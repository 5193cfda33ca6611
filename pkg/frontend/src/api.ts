/**
 * Server access. The reader consumes exactly two endpoints per document:
 * the rendered HTML variant and the bundle JSON.
 */

import { Bundle, parseBundle } from "./bundle.js";

export type Variant = "aug" | "base";

export interface ReaderParams {
  docId: string;
  variant: Variant;
  studyMode: boolean;
}

export function parseReaderParams(search: string): ReaderParams {
  const params = new URLSearchParams(search);
  const docId = params.get("doc");
  if (!docId) throw new Error("missing ?doc=<id> parameter");
  const variant = params.get("variant") === "base" ? "base" : "aug";
  return { docId, variant, studyMode: params.get("study") === "1" };
}

export async function fetchDocumentHtml(
  baseUrl: string,
  docId: string,
  variant: Variant,
): Promise<string> {
  const response = await fetch(
    `${baseUrl}/doc/${encodeURIComponent(docId)}?variant=${variant}`,
  );
  if (!response.ok) {
    throw new Error(`document fetch failed: ${response.status}`);
  }
  return response.text();
}

export async function fetchBundle(
  baseUrl: string,
  docId: string,
): Promise<Bundle> {
  const response = await fetch(
    `${baseUrl}/doc/${encodeURIComponent(docId)}/bundle`,
  );
  if (!response.ok) {
    throw new Error(`bundle fetch failed: ${response.status}`);
  }
  return parseBundle(await response.json());
}
