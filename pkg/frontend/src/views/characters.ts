// Characters tab: the character roster, per-character detail (secrets
// visibly marked private), creation, deletion — plus the relationship list,
// since relationships hang off character pairs.

import { ApiClient } from "../api.js";
import { banner, clear, el } from "../render.js";
import type { Character, Relationship } from "../types.js";

const RELATIONSHIP_KINDS = ["family", "romantic", "friend", "acquaintance", "stranger"];

export class CharactersView {
  readonly element: HTMLElement;
  private listBox: HTMLElement;
  private detailBox: HTMLElement;
  private relationshipBox: HTMLElement;
  private notice: HTMLElement;
  private characters: Character[] = [];

  constructor(private api: ApiClient) {
    this.listBox = el("div", { class: "entity-list" });
    this.detailBox = el("div", { class: "detail" });
    this.relationshipBox = el("div", { class: "relationships" });
    this.notice = el("div", {});
    this.element = el(
      "div",
      { class: "view view-characters" },
      this.notice,
      el("div", { class: "columns" },
        el("div", { class: "col" },
          el("h2", {}, "Characters"),
          this.listBox,
          this.createForm(),
        ),
        el("div", { class: "col" },
          this.detailBox,
          el("h2", {}, "Relationships"),
          this.relationshipBox,
        ),
      ),
    );
  }

  async refresh(): Promise<void> {
    clear(this.notice);
    try {
      this.characters = await this.api.list<Character>("characters");
      this.renderList();
      await this.renderRelationships();
    } catch (error) {
      this.notice.append(banner("error", `failed to load characters: ${String(error)}`));
    }
  }

  private renderList(): void {
    clear(this.listBox);
    if (!this.characters.length) {
      this.listBox.append(el("p", { class: "empty" }, "No characters yet."));
      return;
    }
    for (const character of this.characters) {
      this.listBox.append(
        el("div", { class: "entity-row", "data-pk": character.pk },
          el("a", { href: "#", class: "entity-name", onclick: (event) => { event.preventDefault(); this.showDetail(character); } },
            `${character.name} (${character.age}, ${character.occupation})`),
          el("button", { class: "danger", onclick: () => void this.remove(character.pk) }, "delete"),
        ),
      );
    }
  }

  private showDetail(character: Character): void {
    clear(this.detailBox);
    const rows: HTMLElement[] = [];
    const publicFields: [string, string | undefined | null][] = [
      ["name", character.name],
      ["gender", character.gender],
      ["age", String(character.age)],
      ["occupation", character.occupation],
      ["pronouns", character.pronouns],
      ["decision style", character.decision_style],
      ["public info", character.public_info],
    ];
    for (const [label, value] of publicFields) {
      if (value) rows.push(el("div", { class: "field" }, el("b", {}, `${label}: `), value));
    }
    if (character.personality) {
      const traits = Object.entries(character.personality)
        .filter(([, level]) => level)
        .map(([trait, level]) => `${trait}: ${level}`)
        .join("; ");
      if (traits) rows.push(el("div", { class: "field" }, el("b", {}, "personality: "), traits));
    }
    if (character.moral_values?.length) {
      rows.push(el("div", { class: "field" }, el("b", {}, "moral values: "), character.moral_values.join(", ")));
    }
    for (const [key, value] of Object.entries(character.extra_public ?? {})) {
      rows.push(el("div", { class: "field" }, el("b", {}, `${key}: `), value));
    }
    if (character.secret_info) {
      rows.push(
        el("div", { class: "field secret" },
          el("span", { class: "private-badge" }, "private"),
          el("b", {}, " secret info: "), character.secret_info),
      );
    }
    for (const [key, value] of Object.entries(character.extra_private ?? {})) {
      rows.push(
        el("div", { class: "field secret" },
          el("span", { class: "private-badge" }, "private"),
          el("b", {}, ` ${key}: `), value),
      );
    }
    this.detailBox.append(el("h2", {}, `Character: ${character.name}`), ...rows);
  }

  private createForm(): HTMLElement {
    const name = el("input", { placeholder: "name", name: "name" });
    const age = el("input", { placeholder: "age", name: "age", type: "number", value: "30" });
    const occupation = el("input", { placeholder: "occupation", name: "occupation" });
    const pronouns = el("input", { placeholder: "pronouns", name: "pronouns" });
    const publicInfo = el("input", { placeholder: "public info", name: "public_info" });
    const secretInfo = el("input", { placeholder: "secret info (never shown to other agents)", name: "secret_info" });
    const submit = el("button", {
      onclick: async () => {
        clear(this.notice);
        try {
          await this.api.create("characters", {
            name: name.value,
            age: Number(age.value),
            occupation: occupation.value,
            pronouns: pronouns.value,
            public_info: publicInfo.value,
            secret_info: secretInfo.value,
          });
          name.value = occupation.value = publicInfo.value = secretInfo.value = "";
          await this.refresh();
        } catch (error) {
          this.notice.append(banner("error", `create failed: ${String(error)}`));
        }
      },
    }, "add character");
    return el("div", { class: "create-form" },
      el("h3", {}, "New character"),
      name, age, occupation, pronouns, publicInfo, secretInfo, submit);
  }

  private async remove(pk: string): Promise<void> {
    clear(this.notice);
    try {
      await this.api.remove("characters", pk);
      clear(this.detailBox);
      await this.refresh();
    } catch (error) {
      this.notice.append(banner("error", `delete failed: ${String(error)}`));
    }
  }

  private characterSelect(): HTMLSelectElement {
    return el("select", {}, ...this.characters.map((c) => el("option", { value: c.pk }, c.name)));
  }

  private async renderRelationships(): Promise<void> {
    clear(this.relationshipBox);
    const relationships = await this.api.list<Relationship>("relationships");
    const names = new Map(this.characters.map((c) => [c.pk, c.name]));
    for (const rel of relationships) {
      this.relationshipBox.append(
        el("div", { class: "entity-row" },
          el("span", {}, `${names.get(rel.char_a) ?? rel.char_a} — ${rel.kind} — ${names.get(rel.char_b) ?? rel.char_b}`),
          el("button", {
            class: "danger",
            onclick: async () => { await this.api.remove("relationships", rel.pk); await this.refresh(); },
          }, "delete"),
        ),
      );
    }
    if (this.characters.length >= 2) {
      const left = this.characterSelect();
      const right = this.characterSelect();
      const kind = el("select", { name: "kind" }, ...RELATIONSHIP_KINDS.map((k) => el("option", { value: k }, k)));
      const add = el("button", {
        onclick: async () => {
          clear(this.notice);
          try {
            await this.api.create("relationships", { char_a: left.value, char_b: right.value, kind: kind.value });
            await this.refresh();
          } catch (error) {
            this.notice.append(banner("error", `relationship failed: ${String(error)}`));
          }
        },
      }, "link");
      this.relationshipBox.append(el("div", { class: "create-form" }, left, kind, right, add));
    }
  }
}
