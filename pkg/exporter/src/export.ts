/**
 * Sequence export: run video frames through the backbone and write a
 * bundle directory in the engine's interchange layout (BMT1 feature
 * tensors, {0,255} mask images, text manifest).
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

import { buildBackbone, DEFAULT_SEED, extractFeatures, FEATURE_STRIDE } from './backbone'
import { writeTensor } from './bmt'
import { BundleMeta, renderManifest } from './manifest'
import { readLabels, readRgb, writeGray } from './png'

export type ResizePolicy = 'native' | '480'

export interface ExportJob {
  framesDir: string
  masksDir: string
  outDir: string
  resize?: ResizePolicy
  seed?: number
}

const FRAME_RE = /\.png$/i
const SHORT_SIDE = 480

function listFrames(dir: string): string[] {
  if (!fs.existsSync(dir)) throw new Error(`frame directory ${dir} does not exist`)
  const frames = fs.readdirSync(dir).filter(f => FRAME_RE.test(f)).sort()
  if (frames.length === 0) throw new Error(`no .png frames found in ${dir}`)
  return frames
}

function targetSize(h: number, w: number, resize: ResizePolicy): [number, number] {
  if (resize === 'native') return [h, w]
  const short = Math.min(h, w)
  if (short <= SHORT_SIDE) return [h, w]
  const scale = SHORT_SIDE / short
  return [Math.round(h * scale), Math.round(w * scale)]
}

function padTo16(value: number): number {
  return Math.ceil(value / FEATURE_STRIDE) * FEATURE_STRIDE
}

/** Bilinear frame resize + bottom/right zero padding to multiples of 16. */
function prepareFrame(
  rgb: Float32Array,
  h: number,
  w: number,
  targetH: number,
  targetW: number,
): { data: Float32Array; padH: number; padW: number } {
  const padH = padTo16(targetH)
  const padW = padTo16(targetW)
  const out = tf.tidy(() => {
    let img = tf.tensor3d(rgb, [h, w, 3])
    if (targetH !== h || targetW !== w) {
      img = tf.image.resizeBilinear(img, [targetH, targetW])
    }
    return img.pad([
      [0, padH - targetH],
      [0, padW - targetW],
      [0, 0],
    ]) as tf.Tensor3D
  })
  const data = new Float32Array(out.dataSync() as Float32Array)
  out.dispose()
  return { data, padH, padW }
}

function nearestResizeLabels(
  labels: Uint8Array,
  h: number,
  w: number,
  targetH: number,
  targetW: number,
): Uint8Array {
  if (targetH === h && targetW === w) return labels
  const out = new Uint8Array(targetH * targetW)
  for (let y = 0; y < targetH; y++) {
    const sy = Math.min(h - 1, Math.floor(((y + 0.5) * h) / targetH))
    for (let x = 0; x < targetW; x++) {
      const sx = Math.min(w - 1, Math.floor(((x + 0.5) * w) / targetW))
      out[y * targetW + x] = labels[sy * w + sx]
    }
  }
  return out
}

export interface ExportResult {
  outDir: string
  frames: number
  objects: number
  featureDims: [number, number, number]
  fullDims: [number, number]
}

export function exportSequence(job: ExportJob): ExportResult {
  const resize: ResizePolicy = job.resize ?? 'native'
  const frames = listFrames(job.framesDir)
  const maskPath = (stem: string) => path.join(job.masksDir, `${stem}.png`)
  const firstStem = path.basename(frames[0], path.extname(frames[0]))
  if (!fs.existsSync(maskPath(firstStem))) {
    throw new Error(`missing annotation for the initial frame: ${maskPath(firstStem)}`)
  }

  fs.mkdirSync(path.join(job.outDir, 'frames'), { recursive: true })
  fs.mkdirSync(path.join(job.outDir, 'gt'), { recursive: true })

  const model = buildBackbone(job.seed ?? DEFAULT_SEED)
  let meta: BundleMeta | null = null
  const frameFiles: string[] = []
  const gtFiles: string[] = []
  let objects = 0
  let featureDims: [number, number, number] = [0, 0, 0]

  frames.forEach((frameName, index) => {
    let image
    try {
      image = readRgb(path.join(job.framesDir, frameName))
    } catch (err) {
      throw new Error(`unreadable frame ${frameName}: ${(err as Error).message}`)
    }
    const [targetH, targetW] = targetSize(image.height, image.width, resize)
    if (meta === null) {
      meta = {
        frames: frames.length,
        objects: 0,
        channels: 0,
        featureHeight: padTo16(targetH) / FEATURE_STRIDE,
        featureWidth: padTo16(targetW) / FEATURE_STRIDE,
        fullHeight: targetH,
        fullWidth: targetW,
        frameFiles,
        gtFiles,
      }
    } else if (targetH !== meta.fullHeight || targetW !== meta.fullWidth) {
      throw new Error(`frame ${frameName} has inconsistent dimensions`)
    }
    const prepared = prepareFrame(image.data, image.height, image.width, targetH, targetW)
    const features = extractFeatures(model, prepared.data, prepared.padH, prepared.padW)
    featureDims = [features.channels, features.height, features.width]
    meta.channels = features.channels
    const relative = `frames/${index.toString().padStart(4, '0')}.bmt`
    writeTensor(path.join(job.outDir, relative), features.data, [...featureDims])
    frameFiles.push(relative)

    const stem = path.basename(frameName, path.extname(frameName))
    const annotation = maskPath(stem)
    if (!fs.existsSync(annotation)) return
    const raw = readLabels(annotation)
    const labels = nearestResizeLabels(raw.labels, raw.height, raw.width, targetH, targetW)
    const frameObjects = labels.reduce((max, v) => Math.max(max, v), 0)
    if (index === 0) {
      objects = frameObjects
      if (objects < 1) throw new Error('initial annotation contains no objects')
    }
    for (let obj = 1; obj <= Math.max(objects, frameObjects); obj++) {
      const binary = new Uint8Array(labels.length)
      for (let i = 0; i < labels.length; i++) binary[i] = labels[i] === obj ? 255 : 0
      const gtRelative = `gt/${index.toString().padStart(4, '0')}_obj${obj}.png`
      writeGray(path.join(job.outDir, gtRelative), binary, targetW, targetH)
      gtFiles.push(gtRelative)
    }
  })

  const finalMeta = meta as unknown as BundleMeta
  finalMeta.objects = objects
  fs.writeFileSync(path.join(job.outDir, 'manifest'), renderManifest(finalMeta))
  return {
    outDir: job.outDir,
    frames: frames.length,
    objects,
    featureDims,
    fullDims: [finalMeta.fullHeight, finalMeta.fullWidth],
  }
}
