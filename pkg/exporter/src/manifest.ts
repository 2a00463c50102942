/** Bundle manifest rendering in the engine's structured-text dialect. */

export interface BundleMeta {
  frames: number
  objects: number
  channels: number
  featureHeight: number
  featureWidth: number
  fullHeight: number
  fullWidth: number
  frameFiles: string[]
  gtFiles: string[]
}

export const FORMAT_VERSION = 1

export function renderManifest(meta: BundleMeta): string {
  const lines = [
    `format_version: ${FORMAT_VERSION}`,
    `frames: ${meta.frames}`,
    `objects: ${meta.objects}`,
    `channels: ${meta.channels}`,
    `feature_height: ${meta.featureHeight}`,
    `feature_width: ${meta.featureWidth}`,
    `full_height: ${meta.fullHeight}`,
    `full_width: ${meta.fullWidth}`,
    'frame_files:',
    ...meta.frameFiles.map(f => `  ${f}`),
    'gt_files:',
    ...meta.gtFiles.map(f => `  ${f}`),
  ]
  return lines.join('\n') + '\n'
}
