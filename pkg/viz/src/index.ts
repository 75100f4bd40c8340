export { loadEmbeddings, parseEmbeddings, ParseError, type EmbeddingTable } from "./table.js";
export { separationMetric, MetricError } from "./separation.js";
export { projectPca, jacobiEigen, covariance, columnMeans, ProjectionError } from "./pca.js";
export { projectSne } from "./sne.js";
export { renderScatter, RenderError, type RenderResult } from "./render.js";
export { encodePng } from "./png.js";
