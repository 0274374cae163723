import { AnnotationClient } from "./client.js";
import { mountApp } from "./app.js";

/**
 * Entry point.  Query parameters:
 *   ?annotator=NAME          recorded with every submitted label
 *   ?variants=a,b,c          overrides the variant label choices
 */
function boot(): void {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app element");
  }
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "anonymous";
  const variantsParam = params.get("variants");
  const variantLabels = variantsParam
    ? variantsParam.split(",").map((s) => s.trim()).filter((s) => s.length > 0)
    : undefined;

  const client = new AnnotationClient(window.location.origin);
  const loop = mountApp(root, client, { annotator, variantLabels });
  void loop.start("quality");
}

boot();
