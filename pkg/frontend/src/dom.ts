// Small DOM helpers; all rendering goes through these.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function fieldError(id: string, message: string | null): void {
  const slot = document.getElementById(`${id}-error`);
  if (!slot) return;
  slot.textContent = message ?? '';
  slot.classList.toggle('visible', Boolean(message));
}
