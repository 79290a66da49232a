// Scene view: three.js rendering of the exported .glb with pickable
// instances, plus a renderer-free pose table the tests (and the selection
// HUD) read without WebGL.

import * as THREE from 'three';
import { GLTFLoader } from 'three/examples/jsm/loaders/GLTFLoader.js';
import type { ApiClient } from './api';
import type { SessionStore } from './state';
import type { SceneDocumentJson } from './types';

export interface NodePose {
  name: string;
  translation: [number, number, number];
  rotation: [number, number, number, number];
  scale: [number, number, number];
}

/** Parse the JSON chunk out of a GLB container (no geometry decode). */
export function parseGlbJson(buffer: ArrayBuffer): Record<string, any> {
  const view = new DataView(buffer);
  if (view.getUint32(0, true) !== 0x46546c67) throw new Error('bad GLB magic');
  if (view.getUint32(4, true) !== 2) throw new Error('unsupported GLB version');
  const length = view.getUint32(12, true);
  const type = view.getUint32(16, true);
  if (type !== 0x4e4f534a) throw new Error('first GLB chunk is not JSON');
  const jsonBytes = new Uint8Array(buffer, 20, length);
  return JSON.parse(new TextDecoder().decode(jsonBytes));
}

/** Node TRS poses keyed by node name. */
export function glbNodePoses(buffer: ArrayBuffer): Map<string, NodePose> {
  const gltf = parseGlbJson(buffer);
  const poses = new Map<string, NodePose>();
  for (const node of gltf.nodes ?? []) {
    poses.set(node.name, {
      name: node.name,
      translation: node.translation ?? [0, 0, 0],
      rotation: node.rotation ?? [0, 0, 0, 1],
      scale: node.scale ?? [1, 1, 1],
    });
  }
  return poses;
}

export function countPickable(doc: SceneDocumentJson): { instances: number; layers: number } {
  return { instances: doc.instances.length, layers: doc.layers.length };
}

export class SceneView {
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer | null = null;
  private raycaster = new THREE.Raycaster();
  private loader = new GLTFLoader();
  private root: THREE.Object3D | null = null;
  private polling = false;

  constructor(
    private api: ApiClient,
    private store: SessionStore,
    private container: HTMLElement | null
  ) {
    this.camera = new THREE.PerspectiveCamera(50, 16 / 9, 0.5, 20000);
    this.camera.position.set(600, 600, 600);
    this.camera.lookAt(0, 0, 0);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(500, 1000, 250);
    this.scene.add(sun);
    if (container && typeof WebGLRenderingContext !== 'undefined') {
      try {
        this.renderer = new THREE.WebGLRenderer({ antialias: true });
        container.appendChild(this.renderer.domElement);
      } catch {
        this.renderer = null; // headless: keep the scene graph without drawing
      }
    }
  }

  /** Replace the scene content from a freshly exported .glb. */
  async reload(): Promise<void> {
    const buffer = await this.api.getSceneGlb(this.store.current.sessionId);
    const gltf = await this.loader.parseAsync(buffer, '');
    if (this.root) this.scene.remove(this.root);
    this.root = gltf.scene;
    this.scene.add(this.root);
    this.render();
  }

  pickAt(ndcX: number, ndcY: number): string | null {
    if (!this.root) return null;
    this.raycaster.setFromCamera(new THREE.Vector2(ndcX, ndcY), this.camera);
    const hits = this.raycaster.intersectObjects(this.root.children, true);
    for (const hit of hits) {
      let node: THREE.Object3D | null = hit.object;
      while (node) {
        if (node.name && !node.name.startsWith('layer:') && node.name !== 'sky') {
          this.store.select(node.name);
          return node.name;
        }
        node = node.parent;
      }
    }
    this.store.select(null);
    return null;
  }

  render() {
    if (this.renderer) this.renderer.render(this.scene, this.camera);
  }

  /** Long-poll the server; refresh the document and glb on new revisions. */
  async watch(): Promise<void> {
    if (this.polling) return;
    this.polling = true;
    while (this.polling) {
      try {
        const events = await this.api.events(
          this.store.current.sessionId,
          this.store.current.lastRevisionSeen,
          25
        );
        this.store.setHistoryFlags(events.can_undo, events.can_redo);
        if (events.changed) {
          await this.store.refresh();
          await this.reload();
        }
      } catch {
        await new Promise((resolve) => setTimeout(resolve, 1000));
      }
    }
  }

  stop() {
    this.polling = false;
  }
}
