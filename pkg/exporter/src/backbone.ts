/**
 * DenseNet-121 encoder, first three dense blocks only, so the deepest map
 * keeps 1/16 of the input resolution with 1024 channels.
 *
 * Weights are deterministic seeded stand-ins (no pretrained download in
 * this environment): every convolution draws from a He-normal initializer
 * with a per-layer seed derived from the base seed, and batch-norm layers
 * run in inference mode on their frozen default statistics. Re-running the
 * export therefore produces bit-identical tensors for the same tfjs build.
 */

import * as tf from '@tensorflow/tfjs'

const GROWTH_RATE = 32
const BLOCK_LAYERS = [6, 12, 24] // DenseNet-121 blocks 1-3

export const FEATURE_CHANNELS = 1024
export const FEATURE_STRIDE = 16
export const DEFAULT_SEED = 20211201

export function buildBackbone(seed: number = DEFAULT_SEED): tf.LayersModel {
  let nextSeed = seed
  const conv = (
    x: tf.SymbolicTensor,
    filters: number,
    kernel: number,
    stride: number,
  ): tf.SymbolicTensor =>
    tf.layers
      .conv2d({
        filters,
        kernelSize: kernel,
        strides: stride,
        padding: 'same',
        useBias: false,
        kernelInitializer: tf.initializers.heNormal({ seed: nextSeed++ }),
      })
      .apply(x) as tf.SymbolicTensor

  const bnRelu = (x: tf.SymbolicTensor): tf.SymbolicTensor => {
    const bn = tf.layers.batchNormalization({ epsilon: 1.001e-5 }).apply(x)
    return tf.layers.reLU().apply(bn) as tf.SymbolicTensor
  }

  const denseLayer = (x: tf.SymbolicTensor): tf.SymbolicTensor => {
    let y = bnRelu(x)
    y = conv(y, 4 * GROWTH_RATE, 1, 1)
    y = bnRelu(y)
    y = conv(y, GROWTH_RATE, 3, 1)
    return tf.layers.concatenate().apply([x, y]) as tf.SymbolicTensor
  }

  const transition = (x: tf.SymbolicTensor, channels: number): tf.SymbolicTensor => {
    let y = bnRelu(x)
    y = conv(y, channels, 1, 1)
    return tf.layers
      .averagePooling2d({ poolSize: 2, strides: 2 })
      .apply(y) as tf.SymbolicTensor
  }

  const input = tf.input({ shape: [null, null, 3] })
  let x = conv(input, 64, 7, 2)
  x = bnRelu(x)
  x = tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: 'same' })
    .apply(x) as tf.SymbolicTensor

  let channels = 64
  BLOCK_LAYERS.forEach((layerCount, blockIndex) => {
    for (let i = 0; i < layerCount; i++) x = denseLayer(x)
    channels += layerCount * GROWTH_RATE
    if (blockIndex < BLOCK_LAYERS.length - 1) {
      channels = Math.floor(channels / 2)
      x = transition(x, channels)
    }
  })
  if (channels !== FEATURE_CHANNELS) {
    throw new Error(`backbone wiring error: ${channels} output channels`)
  }
  return tf.model({ inputs: input, outputs: x })
}

/**
 * Run one frame through the backbone. Input is HWC RGB in [0, 1]; spatial
 * dims must be multiples of 16. Returns CHW float32 features.
 */
export function extractFeatures(
  model: tf.LayersModel,
  rgb: Float32Array,
  height: number,
  width: number,
): { channels: number; height: number; width: number; data: Float32Array } {
  if (height % FEATURE_STRIDE !== 0 || width % FEATURE_STRIDE !== 0) {
    throw new Error(`input dims ${height}x${width} must be multiples of ${FEATURE_STRIDE}`)
  }
  const result = tf.tidy(() => {
    const input = tf.tensor4d(rgb, [1, height, width, 3])
    const output = model.predict(input) as tf.Tensor4D
    return output.squeeze([0]).transpose([2, 0, 1]) as tf.Tensor3D
  })
  const [c, h, w] = result.shape
  const data = result.dataSync() as Float32Array
  result.dispose()
  return { channels: c, height: h, width: w, data: new Float32Array(data) }
}
