import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { jointPosition } from "./geometry";
import type { JointMeta, Vec3 } from "./types";

export interface DragCallbacks {
  onDragStart(jointId: number): boolean;
  onDragMove(jointId: number, position: Vec3): void;
  onDragEnd(jointId: number): void;
  onSelect(jointId: number): void;
}

const JOINT_RADIUS = 0.45;
const COLOR_JOINT = 0x4f86f7;
const COLOR_SELECTED = 0xf7b64f;
const COLOR_PINNED = 0xe05555;
const COLOR_BONE = 0x9fb2cc;

function makeLabel(text: string): THREE.Sprite {
  const canvas = document.createElement("canvas");
  canvas.width = 64;
  canvas.height = 64;
  const ctx = canvas.getContext("2d")!;
  ctx.font = "bold 40px sans-serif";
  ctx.fillStyle = "#e8ecf2";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(text, 32, 34);
  const sprite = new THREE.Sprite(
    new THREE.SpriteMaterial({ map: new THREE.CanvasTexture(canvas), depthTest: false })
  );
  sprite.scale.set(1.4, 1.4, 1);
  return sprite;
}

/** Orbitable 3D viewport: joints as spheres labeled by id, bones as
 * capsule-like cylinders, pointer dragging in a camera-facing plane. */
export class SkeletonEditor {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private controls: OrbitControls;
  private raycaster = new THREE.Raycaster();
  private spheres = new Map<number, THREE.Mesh>();
  private bones = new Map<number, THREE.Mesh>();
  private joints: JointMeta[] = [];
  private dragJoint: number | null = null;
  private dragPlane = new THREE.Plane();
  private pinned: ReadonlySet<number> = new Set();
  private selected: number | null = null;

  constructor(
    container: HTMLElement,
    private callbacks: DragCallbacks
  ) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(
      45,
      container.clientWidth / container.clientHeight,
      0.1,
      500
    );
    this.camera.position.set(24, 10, 34);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.target.set(0, 0, 0);

    this.scene.background = new THREE.Color(0x14161c);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const sun = new THREE.DirectionalLight(0xffffff, 1.1);
    sun.position.set(10, 30, 20);
    this.scene.add(sun);
    const grid = new THREE.GridHelper(60, 30, 0x2c3140, 0x22252f);
    grid.position.y = -15;
    this.scene.add(grid);

    const dom = this.renderer.domElement;
    dom.addEventListener("pointerdown", (e) => this.pointerDown(e));
    dom.addEventListener("pointermove", (e) => this.pointerMove(e));
    dom.addEventListener("pointerup", () => this.pointerUp());
    window.addEventListener("resize", () => {
      this.camera.aspect = container.clientWidth / container.clientHeight;
      this.camera.updateProjectionMatrix();
      this.renderer.setSize(container.clientWidth, container.clientHeight);
    });

    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  buildSkeleton(joints: JointMeta[]): void {
    this.joints = joints;
    const sphereGeo = new THREE.SphereGeometry(JOINT_RADIUS, 20, 16);
    for (const j of joints) {
      const mesh = new THREE.Mesh(
        sphereGeo,
        new THREE.MeshStandardMaterial({ color: COLOR_JOINT })
      );
      mesh.userData.jointId = j.id;
      const label = makeLabel(String(j.id));
      label.position.set(0, JOINT_RADIUS * 1.9, 0);
      mesh.add(label);
      this.scene.add(mesh);
      this.spheres.set(j.id, mesh);
      if (j.parent !== 0) {
        const bone = new THREE.Mesh(
          new THREE.CylinderGeometry(0.16, 0.16, 1, 10),
          new THREE.MeshStandardMaterial({ color: COLOR_BONE })
        );
        this.scene.add(bone);
        this.bones.set(j.id, bone);
      }
    }
  }

  setPose(pose: number[]): void {
    for (const j of this.joints) {
      const p = jointPosition(pose, j.id);
      this.spheres.get(j.id)!.position.set(p.x, p.y, p.z);
    }
    for (const j of this.joints) {
      if (j.parent === 0) continue;
      const bone = this.bones.get(j.id)!;
      const a = this.spheres.get(j.parent)!.position;
      const b = this.spheres.get(j.id)!.position;
      const mid = a.clone().add(b).multiplyScalar(0.5);
      const dir = b.clone().sub(a);
      const len = Math.max(dir.length(), 1e-6);
      bone.position.copy(mid);
      bone.scale.set(1, len, 1);
      bone.quaternion.setFromUnitVectors(
        new THREE.Vector3(0, 1, 0),
        dir.normalize()
      );
    }
  }

  setPinned(pinned: ReadonlySet<number>): void {
    this.pinned = pinned;
    this.refreshColors();
  }

  setSelected(jointId: number | null): void {
    this.selected = jointId;
    this.refreshColors();
  }

  private refreshColors(): void {
    for (const [id, mesh] of this.spheres) {
      const mat = mesh.material as THREE.MeshStandardMaterial;
      if (this.pinned.has(id)) mat.color.setHex(COLOR_PINNED);
      else if (id === this.selected) mat.color.setHex(COLOR_SELECTED);
      else mat.color.setHex(COLOR_JOINT);
    }
  }

  private pickJoint(event: PointerEvent): number | null {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    const hits = this.raycaster.intersectObjects([...this.spheres.values()], false);
    return hits.length ? (hits[0].object.userData.jointId as number) : null;
  }

  private pointerDown(event: PointerEvent): void {
    const jointId = this.pickJoint(event);
    if (jointId === null) return;
    this.callbacks.onSelect(jointId);
    if (event.shiftKey) return; // shift-click only selects/pins via toolbar
    if (!this.callbacks.onDragStart(jointId)) return;
    this.dragJoint = jointId;
    this.controls.enabled = false;
    const origin = this.spheres.get(jointId)!.position.clone();
    const normal = new THREE.Vector3();
    this.camera.getWorldDirection(normal);
    this.dragPlane.setFromNormalAndCoplanarPoint(normal, origin);
  }

  private pointerMove(event: PointerEvent): void {
    if (this.dragJoint === null) return;
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    const hit = new THREE.Vector3();
    if (this.raycaster.ray.intersectPlane(this.dragPlane, hit)) {
      this.spheres.get(this.dragJoint)!.position.copy(hit);
      this.callbacks.onDragMove(this.dragJoint, { x: hit.x, y: hit.y, z: hit.z });
    }
  }

  private pointerUp(): void {
    if (this.dragJoint !== null) {
      const id = this.dragJoint;
      this.dragJoint = null;
      this.callbacks.onDragEnd(id);
    }
    this.controls.enabled = true;
  }
}
